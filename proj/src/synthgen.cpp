#include "zeroreg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "zeroreg/error.hpp"
#include "zeroreg/rng.hpp"

namespace zeroreg {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string>& category_vocabulary() {
  static const std::vector<std::string> vocab = {"chair",   "table", "sofa",    "bed",   "lamp",   "cabinet",
                                                 "desk",    "shelf", "monitor", "plant", "toilet", "bathtub"};
  return vocab;
}

Eigen::VectorXd category_prototype(int category, int dim) {
  CounterRng rng(0x70726f746fULL, static_cast<std::uint64_t>(category) * 4099 + static_cast<std::uint64_t>(dim));
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = normal(rng);
  return v.normalized();
}

int GroundTruth::source_object_of(MaskRef ref) const {
  for (const auto& [m, o] : source_mask_objects) {
    if (m == ref) return o;
  }
  return -1;
}

int GroundTruth::target_object_of(MaskRef ref) const {
  for (const auto& [m, o] : target_mask_objects) {
    if (m == ref) return o;
  }
  return -1;
}

// ---------------------------------------------------------------------------
// Rendering

CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.unitOrthogonal();
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return CameraPose::FromParts(r, eye);
}

RenderResult render_depth_indexed(const Points3d& points, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                                  int view_id, double quantization) {
  RenderResult out;
  out.frame.view_id = view_id;
  out.frame.intrinsics = intrinsics;
  out.frame.pose = pose;
  out.frame.depth = DepthImage::Zero(intrinsics.height, intrinsics.width);
  out.winner = PixelIndexImage::Constant(intrinsics.height, intrinsics.width, -1);

  Eigen::MatrixXd zbuf = Eigen::MatrixXd::Constant(intrinsics.height, intrinsics.width,
                                                   std::numeric_limits<double>::infinity());
  const Points3d cam = pose.inverse().apply(points);
  bool any = false;
  for (Eigen::Index i = 0; i < cam.cols(); ++i) {
    const double z = cam(2, i);
    if (!(z > 1e-6)) continue;
    const long col = std::lround(intrinsics.fx * cam(0, i) / z + intrinsics.cx);
    const long row = std::lround(intrinsics.fy * cam(1, i) / z + intrinsics.cy);
    if (col < 0 || row < 0 || col >= intrinsics.width || row >= intrinsics.height) continue;
    if (z < zbuf(row, col)) {
      zbuf(row, col) = z;
      out.winner(row, col) = static_cast<int>(i);
      any = true;
    }
  }
  if (!any) throw EmptyRenderError("render_depth: no point projects into the image");

  for (Eigen::Index r = 0; r < zbuf.rows(); ++r) {
    for (Eigen::Index c = 0; c < zbuf.cols(); ++c) {
      if (out.winner(r, c) < 0) continue;
      double z = zbuf(r, c);
      if (quantization > 0.0) z = std::max(quantization, std::round(z / quantization) * quantization);
      out.frame.depth(r, c) = static_cast<float>(z);
    }
  }
  return out;
}

DepthFrame render_depth(const Points3d& points, const CameraIntrinsics& intrinsics, const CameraPose& pose) {
  return render_depth_indexed(points, intrinsics, pose).frame;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

// Stream ids; each concern draws from its own stream so that, e.g., semantic
// noise never perturbs geometry.
enum Stream : std::uint64_t {
  kLayout = 1,
  kTemplates = 2,
  kSemantic = 3,
  kDescriptor = 4,
  kDepthNoise = 5,
  kOutliers = 6,
  kTransform = 7,
  kCameras = 8,
};

struct ObjectTemplate {
  Points3d surface;  // object frame
  std::vector<int> keypoints;
  Eigen::MatrixXd descriptors;  // keypoints x g, unit rows
  double bottom = 0.0;          // min z
  double radius = 0.0;          // max horizontal extent
};

Eigen::Vector3d random_unit(CounterRng& rng) {
  std::normal_distribution<double> normal;
  Eigen::Vector3d v;
  do v = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
  while (v.norm() < 1e-9);
  return v.normalized();
}

Eigen::VectorXd perturbed_unit(const Eigen::VectorXd& base, double sigma, CounterRng& rng) {
  std::normal_distribution<double> normal;
  const double scale = sigma / std::sqrt(static_cast<double>(base.size()));
  Eigen::VectorXd v = base;
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += scale * normal(rng);
  return v.normalized();
}

ObjectTemplate make_template(const SceneSpec& spec, int shape, CounterRng rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto range = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };
  ObjectTemplate t;
  t.surface.resize(3, spec.points_per_object);
  if (shape == 0) {
    const Eigen::Vector3d h(range(0.15, 0.4), range(0.15, 0.4), range(0.15, 0.4));
    const double ax = h.y() * h.z(), ay = h.x() * h.z(), az = h.x() * h.y();
    for (int i = 0; i < spec.points_per_object; ++i) {
      const double pick = uni(rng) * (ax + ay + az);
      const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
      Eigen::Vector3d p(range(-1, 1), range(-1, 1), range(-1, 1));
      p(axis) = uni(rng) < 0.5 ? -1.0 : 1.0;
      t.surface.col(i) = p.cwiseProduct(h);
    }
  } else if (shape == 1) {
    const Eigen::Vector3d radii(range(0.2, 0.4), range(0.2, 0.4), range(0.2, 0.4));
    for (int i = 0; i < spec.points_per_object; ++i) t.surface.col(i) = random_unit(rng).cwiseProduct(radii);
  } else {
    Eigen::Matrix3d centers;
    Eigen::Vector3d radii;
    for (int b = 0; b < 3; ++b) {
      centers.col(b) = Eigen::Vector3d(range(-0.2, 0.2), range(-0.2, 0.2), range(-0.15, 0.15));
      radii(b) = range(0.12, 0.22);
    }
    const double total = radii.squaredNorm();
    for (int i = 0; i < spec.points_per_object; ++i) {
      const double pick = uni(rng) * total;
      const int b = pick < radii(0) * radii(0) ? 0 : (pick < radii(0) * radii(0) + radii(1) * radii(1) ? 1 : 2);
      t.surface.col(i) = centers.col(b) + radii(b) * random_unit(rng);
    }
  }
  t.bottom = t.surface.row(2).minCoeff();
  t.radius = t.surface.topRows(2).colwise().norm().maxCoeff();

  // Keypoints: greedy subset with a minimum spacing so that distinct keypoints
  // never fall within the descriptor merge radius of each other.
  constexpr double kMinSpacing = 0.06;
  for (Eigen::Index i = 0; i < t.surface.cols() && static_cast<int>(t.keypoints.size()) < spec.keypoints_per_object;
       ++i) {
    const bool far = std::all_of(t.keypoints.begin(), t.keypoints.end(), [&](int k) {
      return (t.surface.col(k) - t.surface.col(i)).norm() >= kMinSpacing;
    });
    if (far) t.keypoints.push_back(static_cast<int>(i));
  }
  std::normal_distribution<double> normal;
  t.descriptors.resize(static_cast<Eigen::Index>(t.keypoints.size()), spec.geometric_dim);
  for (Eigen::Index k = 0; k < t.descriptors.rows(); ++k) {
    for (int j = 0; j < spec.geometric_dim; ++j) t.descriptors(k, j) = normal(rng);
    t.descriptors.row(k).normalize();
  }
  return t;
}

struct SceneObject {
  int category = 0;
  RigidTransformd pose;  // object -> source frame
};

void check_spec(const SceneSpec& spec) {
  const auto fail = [](const std::string& what) { throw GenerationError("invalid scene spec: " + what); };
  if (spec.object_count < 1) fail("object_count must be >= 1");
  if (spec.duplicates_per_category < 1) fail("duplicates_per_category must be >= 1");
  if (spec.view_count < 1) fail("view_count must be >= 1");
  if (spec.points_per_object < 1) fail("points_per_object must be >= 1");
  if (spec.keypoints_per_object < 0) fail("keypoints_per_object must be >= 0");
  if (!(spec.overlap_ratio > 0.0 && spec.overlap_ratio <= 1.0)) fail("overlap_ratio must lie in (0, 1]");
  if (spec.semantic_noise_sigma < 0 || spec.descriptor_noise_sigma < 0 || spec.depth_noise_sigma < 0) {
    fail("noise sigmas must be >= 0");
  }
  if (spec.outlier_mask_count < 0) fail("outlier_mask_count must be >= 0");
  if (spec.semantic_dim < 1 || spec.geometric_dim < 1) fail("feature dimensions must be >= 1");
  if (spec.image_width < 8 || spec.image_height < 8 || !(spec.focal_length > 0)) fail("bad camera geometry");
  if (spec.depth_quantization < 0 || spec.max_rotation_deg < 0 || spec.max_translation < 0) {
    fail("quantization and transform ranges must be >= 0");
  }
}

std::vector<Eigen::Vector2d> place_objects(const std::vector<double>& radii, CounterRng& rng) {
  const std::size_t n = radii.size();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double side = 1.2 * std::sqrt(static_cast<double>(n)) * 1.6 + 1.0;
  for (int restart = 0; restart < 30; ++restart) {
    std::vector<Eigen::Vector2d> pos;
    for (std::size_t i = 0; i < n; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
        const Eigen::Vector2d p((uni(rng) - 0.5) * side, (uni(rng) - 0.5) * side);
        bool ok = true;
        for (std::size_t j = 0; j < pos.size() && ok; ++j) ok = (p - pos[j]).norm() >= radii[i] + radii[j] + 0.3;
        if (ok) {
          pos.push_back(p);
          placed = true;
        }
      }
      if (!placed) break;
    }
    if (pos.size() == n) return pos;
    side *= 1.2;
  }
  throw GenerationError("could not place objects without overlap");
}

struct SideScene {
  std::vector<int> objects;  // scene object ids, ascending
  RigidTransformd frame;     // source frame -> this side's frame
  bool is_target = false;
};

struct RenderedSide {
  SceneBundle bundle;
  std::vector<std::pair<MaskRef, int>> mask_objects;
};

}  // namespace

GeneratedPair generate_pair(const SceneSpec& spec) {
  check_spec(spec);
  const int n = spec.object_count;
  const auto& vocab = category_vocabulary();
  const int vocab_size = static_cast<int>(vocab.size());

  CounterRng layout(spec.seed, kLayout);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Categories: the first `dup` objects share one category, the rest get
  // distinct ones (cycling through the vocabulary if needed).
  std::vector<int> category_order(vocab_size);
  std::iota(category_order.begin(), category_order.end(), 0);
  std::shuffle(category_order.begin(), category_order.end(), layout);
  const int dup = std::min(spec.duplicates_per_category, n);
  std::vector<SceneObject> objects(n);
  for (int i = 0; i < n; ++i) {
    const int slot = i < dup ? 0 : (i - dup + 1) % vocab_size;
    objects[i].category = category_order[slot];
  }

  // The primitive family follows the category; extents and descriptors are per instance.
  std::vector<ObjectTemplate> templates;
  const CounterRng template_root(spec.seed, kTemplates);
  for (int i = 0; i < n; ++i) {
    const int shape = static_cast<int>(CounterRng::mix(static_cast<std::uint64_t>(objects[i].category)) % 3);
    templates.push_back(make_template(spec, shape, template_root.derive(static_cast<std::uint64_t>(i))));
  }

  std::vector<double> radii;
  for (const auto& t : templates) radii.push_back(t.radius);
  const std::vector<Eigen::Vector2d> xy = place_objects(radii, layout);
  for (int i = 0; i < n; ++i) {
    const double yaw = uni(layout) * 2.0 * kPi;
    const auto& t = templates[i];
    objects[i].pose = RigidTransformd::FromParts(rotation_about_axis<double>(Eigen::Vector3d::UnitZ(), yaw),
                                                 Eigen::Vector3d(xy[i].x(), xy[i].y(), -t.bottom));
  }

  // Fragment membership.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), layout);
  int shared = n;
  if (spec.overlap_ratio < 1.0) {
    shared = std::clamp(static_cast<int>(std::ceil(spec.overlap_ratio * n)), std::min(2, n), n);
  }
  SideScene source_side, target_side;
  target_side.is_target = true;
  for (int i = 0; i < n; ++i) {
    if (i < shared) {
      source_side.objects.push_back(order[i]);
      target_side.objects.push_back(order[i]);
    } else if ((i - shared) % 2 == 0) {
      source_side.objects.push_back(order[i]);
    } else {
      target_side.objects.push_back(order[i]);
    }
  }
  std::sort(source_side.objects.begin(), source_side.objects.end());
  std::sort(target_side.objects.begin(), target_side.objects.end());

  // Ground-truth motion.
  CounterRng motion(spec.seed, kTransform);
  const Eigen::Vector3d axis = random_unit(motion);
  const double angle = deg2rad(spec.max_rotation_deg) * uni(motion);
  const Eigen::Vector3d shift = random_unit(motion) * spec.max_translation * uni(motion);
  const RigidTransformd truth = RigidTransformd::FromParts(rotation_about_axis<double>(axis, angle), shift);
  source_side.frame = RigidTransformd::Identity();
  target_side.frame = truth;

  // Floor grid in the source frame, shared by both sides.
  double extent = 0.0;
  for (int i = 0; i < n; ++i) extent = std::max(extent, objects[i].pose.translation.head<2>().cwiseAbs().maxCoeff() + radii[i]);
  extent += 0.8;
  constexpr double kFloorStep = 0.1;
  const int floor_cells = static_cast<int>(std::ceil(2.0 * extent / kFloorStep)) + 1;
  Points3d floor(3, floor_cells * floor_cells);
  for (int a = 0; a < floor_cells; ++a) {
    for (int b = 0; b < floor_cells; ++b) {
      floor.col(a * floor_cells + b) = Eigen::Vector3d(-extent + a * kFloorStep, -extent + b * kFloorStep, 0.0);
    }
  }

  CameraIntrinsics intrinsics;
  intrinsics.fx = intrinsics.fy = spec.focal_length;
  intrinsics.width = spec.image_width;
  intrinsics.height = spec.image_height;
  intrinsics.cx = spec.image_width / 2.0;
  intrinsics.cy = spec.image_height / 2.0;
  const double half_fov = std::atan(std::min(intrinsics.cx, intrinsics.cy) / spec.focal_length);

  CounterRng cameras(spec.seed, kCameras);
  const double base_azimuth = uni(cameras) * 2.0 * kPi;
  const double target_azimuth = base_azimuth + deg2rad(-30.0 + 60.0 * uni(cameras));
  const CounterRng semantic_root(spec.seed, kSemantic);
  const CounterRng descriptor_root(spec.seed, kDescriptor);
  const CounterRng depth_root(spec.seed, kDepthNoise);
  const CounterRng outlier_root(spec.seed, kOutliers);

  const auto render_side = [&](const SideScene& side) {
    const std::uint64_t side_id = side.is_target ? 1 : 0;
    RenderedSide out;
    out.bundle.bundle_id = "synth-" + std::to_string(spec.seed) + (side.is_target ? "-target" : "-source");

    // Points of the side, in the source frame first.
    std::vector<int> point_object;  // index into side.objects, -1 = floor
    std::vector<int> object_offset;
    Eigen::Index total = floor.cols();
    for (int id : side.objects) total += templates[id].surface.cols();
    Points3d pts(3, total);
    Eigen::Index cursor = 0;
    for (std::size_t k = 0; k < side.objects.size(); ++k) {
      const SceneObject& o = objects[side.objects[k]];
      const ObjectTemplate& t = templates[side.objects[k]];
      object_offset.push_back(static_cast<int>(cursor));
      pts.middleCols(cursor, t.surface.cols()) = o.pose.apply(t.surface);
      point_object.insert(point_object.end(), t.surface.cols(), static_cast<int>(k));
      cursor += t.surface.cols();
    }
    const Eigen::Index floor_offset = cursor;
    pts.middleCols(cursor, floor.cols()) = floor;
    point_object.insert(point_object.end(), floor.cols(), -1);

    // Camera ring around the side's objects (source frame), then mapped into the side frame.
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (int id : side.objects) center += objects[id].pose.translation;
    center /= static_cast<double>(side.objects.size());
    center.z() = 0.3;
    double reach = 0.0;
    for (int id : side.objects) {
      reach = std::max(reach, (objects[id].pose.translation - center).norm() + radii[id]);
    }
    reach += 0.3;
    const double distance = 1.02 * reach / std::sin(half_fov);
    const double elevation = deg2rad(50.0);
    const double azimuth0 = side.is_target ? target_azimuth : base_azimuth;
    const Points3d side_pts = side.frame.apply(pts);

    for (int v = 0; v < spec.view_count; ++v) {
      const double az = azimuth0 + deg2rad(spec.view_spacing_deg) * (v - (spec.view_count - 1) / 2.0);
      const Eigen::Vector3d dir(std::cos(elevation) * std::cos(az), std::cos(elevation) * std::sin(az),
                                std::sin(elevation));
      const CameraPose pose_src = look_at(center + distance * dir, center, Eigen::Vector3d::UnitZ());
      const CameraPose pose = side.frame * pose_src;
      RenderResult render = render_depth_indexed(side_pts, intrinsics, pose, v, 0.0);

      // Sensor noise, then quantization.
      CounterRng depth_rng = depth_root.derive(side_id * 1024 + static_cast<std::uint64_t>(v));
      std::normal_distribution<double> normal;
      for (Eigen::Index r = 0; r < render.frame.depth.rows(); ++r) {
        for (Eigen::Index c = 0; c < render.frame.depth.cols(); ++c) {
          if (render.winner(r, c) < 0) continue;
          double z = render.frame.depth(r, c) + spec.depth_noise_sigma * normal(depth_rng);
          if (spec.depth_quantization > 0.0) z = std::round(z / spec.depth_quantization) * spec.depth_quantization;
          render.frame.depth(r, c) = static_cast<float>(std::max(z, std::max(spec.depth_quantization, 1e-4)));
        }
      }

      // Object masks and their semantic features.
      int next_mask = 0;
      for (std::size_t k = 0; k < side.objects.size(); ++k) {
        MaskImage mask = MaskImage::Zero(intrinsics.height, intrinsics.width);
        int count = 0;
        for (Eigen::Index r = 0; r < mask.rows(); ++r) {
          for (Eigen::Index c = 0; c < mask.cols(); ++c) {
            const int w = render.winner(r, c);
            if (w >= 0 && point_object[w] == static_cast<int>(k)) {
              mask(r, c) = 1;
              ++count;
            }
          }
        }
        if (count < 8) continue;
        const int scene_id = side.objects[k];
        ObjectMask om{v, next_mask++, vocab[objects[scene_id].category], std::move(mask)};
        CounterRng sem_rng = semantic_root.derive((side_id * 1024 + static_cast<std::uint64_t>(v)) * 4096 +
                                                  static_cast<std::uint64_t>(scene_id));
        const Eigen::VectorXd feature =
            perturbed_unit(category_prototype(objects[scene_id].category, spec.semantic_dim), spec.semantic_noise_sigma,
                           sem_rng);
        out.bundle.semantic_features.push_back({om.ref(), feature.cast<float>()});
        out.mask_objects.emplace_back(om.ref(), static_cast<int>(k));
        out.bundle.masks.push_back(std::move(om));
      }

      // Spurious single-view detections on the floor.
      CounterRng outlier_rng = outlier_root.derive(side_id);
      for (int o = 0; o < spec.outlier_mask_count; ++o) {
        CounterRng local = outlier_rng.derive(static_cast<std::uint64_t>(o));
        if (static_cast<int>(local() % static_cast<std::uint64_t>(spec.view_count)) != v) continue;
        std::vector<std::pair<int, int>> floor_pixels;
        for (Eigen::Index r = 0; r < render.winner.rows(); ++r) {
          for (Eigen::Index c = 0; c < render.winner.cols(); ++c) {
            if (render.winner(r, c) >= floor_offset) floor_pixels.emplace_back(static_cast<int>(r), static_cast<int>(c));
          }
        }
        if (floor_pixels.empty()) continue;
        const auto [r0, c0] = floor_pixels[local() % floor_pixels.size()];
        MaskImage mask = MaskImage::Zero(intrinsics.height, intrinsics.width);
        int count = 0;
        for (const auto& [r, c] : floor_pixels) {
          if (std::abs(r - r0) <= 8 && std::abs(c - c0) <= 8) {
            mask(r, c) = 1;
            ++count;
          }
        }
        if (count < 4) continue;
        const int category = static_cast<int>(local() % static_cast<std::uint64_t>(vocab_size));
        ObjectMask om{v, next_mask++, vocab[category], std::move(mask)};
        const Eigen::VectorXd feature =
            perturbed_unit(category_prototype(category, spec.semantic_dim), spec.semantic_noise_sigma, local);
        out.bundle.semantic_features.push_back({om.ref(), feature.cast<float>()});
        out.mask_objects.emplace_back(om.ref(), -1);
        out.bundle.masks.push_back(std::move(om));
      }

      // Geometric descriptors at visible keypoints (subpixel locations).
      std::vector<Eigen::Vector2f> pixels;
      std::vector<Eigen::VectorXf> descriptors;
      for (std::size_t k = 0; k < side.objects.size(); ++k) {
        const int scene_id = side.objects[k];
        const ObjectTemplate& t = templates[scene_id];
        CounterRng desc_rng = descriptor_root.derive((side_id * 1024 + static_cast<std::uint64_t>(v)) * 4096 +
                                                     static_cast<std::uint64_t>(scene_id));
        for (std::size_t kp = 0; kp < t.keypoints.size(); ++kp) {
          const Eigen::VectorXd desc =
              perturbed_unit(t.descriptors.row(static_cast<Eigen::Index>(kp)).transpose(), spec.descriptor_noise_sigma,
                             desc_rng);
          const int point = object_offset[k] + t.keypoints[kp];
          const Eigen::Vector3d cam = pose.inverse()(side_pts.col(point));
          if (!(cam.z() > 1e-6)) continue;
          const double u = intrinsics.fx * cam.x() / cam.z() + intrinsics.cx;
          const double vv = intrinsics.fy * cam.y() / cam.z() + intrinsics.cy;
          const long col = std::lround(u);
          const long row = std::lround(vv);
          if (col < 0 || row < 0 || col >= intrinsics.width || row >= intrinsics.height) continue;
          if (render.winner(row, col) != point) continue;
          pixels.emplace_back(static_cast<float>(u), static_cast<float>(vv));
          descriptors.push_back(desc.cast<float>());
        }
      }
      GeometricDescriptorSet set;
      set.view_id = v;
      set.pixels.resize(static_cast<Eigen::Index>(pixels.size()), 2);
      set.descriptors.resize(static_cast<Eigen::Index>(pixels.size()), spec.geometric_dim);
      for (std::size_t i = 0; i < pixels.size(); ++i) {
        set.pixels.row(static_cast<Eigen::Index>(i)) = pixels[i].transpose();
        set.descriptors.row(static_cast<Eigen::Index>(i)) = descriptors[i].transpose();
      }
      out.bundle.geometric.push_back(std::move(set));
      out.bundle.frames.push_back(std::move(render.frame));
    }
    return out;
  };

  RenderedSide src = render_side(source_side);
  RenderedSide tgt = render_side(target_side);

  GeneratedPair pair;
  pair.source = std::move(src.bundle);
  pair.target = std::move(tgt.bundle);
  GroundTruth& gt = pair.truth;
  gt.transform = truth;
  gt.source_mask_objects = std::move(src.mask_objects);
  gt.target_mask_objects = std::move(tgt.mask_objects);

  // Keypoint registries and pairs.
  const auto keypoint_registry = [&](const SideScene& side, std::map<std::pair<int, int>, int>& ids) {
    std::vector<Eigen::Vector3d> kp;
    for (int id : side.objects) {
      const ObjectTemplate& t = templates[id];
      for (std::size_t k = 0; k < t.keypoints.size(); ++k) {
        ids[{id, static_cast<int>(k)}] = static_cast<int>(kp.size());
        kp.push_back(side.frame(objects[id].pose(t.surface.col(t.keypoints[k]))));
      }
    }
    Points3d out(3, static_cast<Eigen::Index>(kp.size()));
    for (std::size_t i = 0; i < kp.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = kp[i];
    return out;
  };
  std::map<std::pair<int, int>, int> src_ids, tgt_ids;
  gt.source_keypoints = keypoint_registry(source_side, src_ids);
  gt.target_keypoints = keypoint_registry(target_side, tgt_ids);
  for (const auto& [key, sid] : src_ids) {
    auto it = tgt_ids.find(key);
    if (it != tgt_ids.end()) gt.point_pairs.emplace_back(sid, it->second);
  }
  std::sort(gt.point_pairs.begin(), gt.point_pairs.end());

  std::vector<Eigen::Vector3d> overlap;
  for (std::size_t a = 0; a < source_side.objects.size(); ++a) {
    const int id = source_side.objects[a];
    gt.source_object_labels.push_back(vocab[objects[id].category]);
    const auto it = std::find(target_side.objects.begin(), target_side.objects.end(), id);
    if (it == target_side.objects.end()) continue;
    gt.object_pairs.emplace_back(static_cast<int>(a), static_cast<int>(it - target_side.objects.begin()));
    const Points3d surf = objects[id].pose.apply(templates[id].surface);
    for (Eigen::Index i = 0; i < surf.cols(); ++i) overlap.push_back(surf.col(i));
  }
  for (int id : target_side.objects) gt.target_object_labels.push_back(vocab[objects[id].category]);
  gt.overlap_points.resize(3, static_cast<Eigen::Index>(overlap.size()));
  for (std::size_t i = 0; i < overlap.size(); ++i) gt.overlap_points.col(static_cast<Eigen::Index>(i)) = overlap[i];
  return pair;
}

// ---------------------------------------------------------------------------
// Suites

SuiteSpec default_suite_spec() {
  SuiteSpec suite;
  suite.base.depth_noise_sigma = 0.005;
  suite.base.seed = 0;
  return suite;
}

SceneSpec sample_scene_spec(const SuiteSpec& suite, int index) {
  CounterRng rng(suite.base.seed, 0x5017e000ULL + static_cast<std::uint64_t>(index));
  SceneSpec spec = suite.base;
  std::uniform_int_distribution<int> count(suite.object_count_min, std::max(suite.object_count_min, suite.object_count_max));
  spec.object_count = count(rng);
  const int dup_hi = std::max(suite.duplicates_min, std::min(suite.duplicates_max, spec.object_count));
  std::uniform_int_distribution<int> dups(std::min(suite.duplicates_min, dup_hi), dup_hi);
  spec.duplicates_per_category = dups(rng);
  std::uniform_real_distribution<double> overlap(suite.overlap_min, std::max(suite.overlap_min, suite.overlap_max));
  spec.overlap_ratio = suite.overlap_min >= suite.overlap_max ? suite.overlap_min : overlap(rng);
  spec.seed = CounterRng::mix(suite.base.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(index));
  return spec;
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(key, e.what());
  }
}

template <typename T>
void read_range(const json& j, const char* key, T& value, T& lo, T& hi) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  try {
    if (v.is_array()) {
      if (v.size() != 2) throw ValidationError(key, "range must be [min, max]");
      lo = v[0].get<T>();
      hi = v[1].get<T>();
      if (lo > hi) throw ValidationError(key, "range min exceeds max");
      value = lo;
    } else {
      value = lo = hi = v.get<T>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(key, e.what());
  }
}

}  // namespace

SuiteSpec parse_suite_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("scene spec: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("scene spec: expected a JSON object");
  static const std::set<std::string> known = {
      "object_count",      "duplicates_per_category", "points_per_object",    "keypoints_per_object",
      "view_count",        "overlap_ratio",           "semantic_noise_sigma", "descriptor_noise_sigma",
      "depth_noise_sigma", "outlier_mask_count",      "seed",                 "semantic_dim",
      "geometric_dim",     "image_width",             "image_height",         "focal_length",
      "depth_quantization", "max_rotation_deg",       "max_translation",      "view_spacing_deg"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError(key, "unknown scene spec key");
  }
  SuiteSpec suite = default_suite_spec();
  SceneSpec& s = suite.base;
  read_range(j, "object_count", s.object_count, suite.object_count_min, suite.object_count_max);
  read_range(j, "duplicates_per_category", s.duplicates_per_category, suite.duplicates_min, suite.duplicates_max);
  read_range(j, "overlap_ratio", s.overlap_ratio, suite.overlap_min, suite.overlap_max);
  read_field(j, "points_per_object", s.points_per_object);
  read_field(j, "keypoints_per_object", s.keypoints_per_object);
  read_field(j, "view_count", s.view_count);
  read_field(j, "semantic_noise_sigma", s.semantic_noise_sigma);
  read_field(j, "descriptor_noise_sigma", s.descriptor_noise_sigma);
  read_field(j, "depth_noise_sigma", s.depth_noise_sigma);
  read_field(j, "outlier_mask_count", s.outlier_mask_count);
  read_field(j, "seed", s.seed);
  read_field(j, "semantic_dim", s.semantic_dim);
  read_field(j, "geometric_dim", s.geometric_dim);
  read_field(j, "image_width", s.image_width);
  read_field(j, "image_height", s.image_height);
  read_field(j, "focal_length", s.focal_length);
  read_field(j, "depth_quantization", s.depth_quantization);
  read_field(j, "max_rotation_deg", s.max_rotation_deg);
  read_field(j, "max_translation", s.max_translation);
  read_field(j, "view_spacing_deg", s.view_spacing_deg);
  return suite;
}

namespace {

json points_json(const Points3d& pts) {
  json out = json::array();
  for (Eigen::Index i = 0; i < pts.cols(); ++i) out.push_back({pts(0, i), pts(1, i), pts(2, i)});
  return out;
}

Points3d points_from_json(const json& j) {
  Points3d pts(3, static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto v = j[i].get<std::vector<double>>();
    if (v.size() != 3) throw FormatError("gt.json: points must have 3 coordinates");
    pts.col(static_cast<Eigen::Index>(i)) = Eigen::Vector3d(v[0], v[1], v[2]);
  }
  return pts;
}

json mask_objects_json(const std::vector<std::pair<MaskRef, int>>& v) {
  json out = json::array();
  for (const auto& [m, o] : v) out.push_back({m.view_id, m.mask_id, o});
  return out;
}

std::vector<std::pair<MaskRef, int>> mask_objects_from_json(const json& j) {
  std::vector<std::pair<MaskRef, int>> out;
  for (const auto& e : j) {
    const auto v = e.get<std::vector<int>>();
    if (v.size() != 3) throw FormatError("gt.json: mask object entries are [view, mask, object]");
    out.emplace_back(MaskRef{v[0], v[1]}, v[2]);
  }
  return out;
}

}  // namespace

std::string ground_truth_to_json(const GroundTruth& truth) {
  json j;
  const auto t = truth.transform.toRowMajor12();
  j["transform"] = std::vector<double>(t.begin(), t.end());
  j["object_pairs"] = truth.object_pairs;
  j["point_pairs"] = truth.point_pairs;
  j["source_keypoints"] = points_json(truth.source_keypoints);
  j["target_keypoints"] = points_json(truth.target_keypoints);
  j["overlap_points"] = points_json(truth.overlap_points);
  j["source_mask_objects"] = mask_objects_json(truth.source_mask_objects);
  j["target_mask_objects"] = mask_objects_json(truth.target_mask_objects);
  j["source_object_labels"] = truth.source_object_labels;
  j["target_object_labels"] = truth.target_object_labels;
  return j.dump(1);
}

GroundTruth ground_truth_from_json(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    GroundTruth gt;
    const auto t = j.at("transform").get<std::vector<double>>();
    if (t.size() != 12) throw FormatError("gt.json: transform needs 12 values");
    std::array<double, 12> a{};
    std::copy(t.begin(), t.end(), a.begin());
    gt.transform = RigidTransformd::FromRowMajor12(a);
    gt.object_pairs = j.at("object_pairs").get<std::vector<IndexPair>>();
    gt.point_pairs = j.at("point_pairs").get<std::vector<IndexPair>>();
    gt.source_keypoints = points_from_json(j.at("source_keypoints"));
    gt.target_keypoints = points_from_json(j.at("target_keypoints"));
    gt.overlap_points = points_from_json(j.at("overlap_points"));
    gt.source_mask_objects = mask_objects_from_json(j.at("source_mask_objects"));
    gt.target_mask_objects = mask_objects_from_json(j.at("target_mask_objects"));
    gt.source_object_labels = j.at("source_object_labels").get<std::vector<std::string>>();
    gt.target_object_labels = j.at("target_object_labels").get<std::vector<std::string>>();
    if (!gt.transform.isValid(1e-6)) throw FormatError("gt.json: transform is not a proper rigid motion");
    return gt;
  } catch (const json::exception& e) {
    throw FormatError(std::string("gt.json: ") + e.what());
  }
}

void write_pair(const GeneratedPair& pair, const fs::path& dir) {
  write_bundle(pair.source, dir / "source");
  write_bundle(pair.target, dir / "target");
  const fs::path gt_path = dir / "gt.json";
  std::ofstream out(gt_path, std::ios::trunc);
  if (!out) throw WriteError(gt_path.string(), "cannot open for writing");
  out << ground_truth_to_json(pair.truth) << '\n';
  if (!out) throw WriteError(gt_path.string(), "write failed");
}

GeneratedPair read_pair(const fs::path& dir) {
  GeneratedPair pair;
  pair.source = read_bundle(dir / "source");
  pair.target = read_bundle(dir / "target");
  const fs::path gt_path = dir / "gt.json";
  std::ifstream in(gt_path);
  if (!in) throw FormatError(gt_path.string() + ": missing ground truth");
  std::stringstream ss;
  ss << in.rdbuf();
  pair.truth = ground_truth_from_json(ss.str());
  return pair;
}

}  // namespace zeroreg
