#include "zeroreg/projection.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "zeroreg/voxel_hash.hpp"

namespace zeroreg {

Points3d mask_points(const SceneBundle& bundle, const ObjectMask& mask, int* dropped) {
  const DepthFrame* frame = bundle.frame(mask.view_id);
  if (frame == nullptr) throw ValidationError("masks.view_id", "no frame for view " + std::to_string(mask.view_id));
  Eigen::Matrix<double, Eigen::Dynamic, 2> pixels(mask.mask.size(), 2);
  Eigen::Index n = 0;
  for (Eigen::Index r = 0; r < mask.mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.mask.cols(); ++c) {
      if (mask.mask(r, c) != 0) pixels.row(n++) << static_cast<double>(c), static_cast<double>(r);
    }
  }
  BackProjection bp = back_project(*frame, pixels.topRows(n));
  if (dropped != nullptr) *dropped += static_cast<int>(bp.dropped.size());
  return std::move(bp.points);
}

double point_overlap_ratio(const Points3d& a, const Points3d& b, double radius) {
  const Points3d& small = a.cols() <= b.cols() ? a : b;
  const Points3d& large = a.cols() <= b.cols() ? b : a;
  if (small.cols() == 0) return 0.0;
  VoxelHash hash(radius);
  for (Eigen::Index i = 0; i < large.cols(); ++i) hash.insert(static_cast<int>(i), large.col(i));
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < small.cols(); ++i) hits += hash.any_within(small.col(i)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(small.cols());
}

namespace {

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n), views(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }

  std::vector<std::size_t> parent;
  std::vector<std::set<int>> views;
};

std::vector<MaskTrack> group_masks(const SceneBundle& bundle, const std::vector<Points3d>& points,
                                   const ProjectionConfig& config, int* discarded) {
  const auto& masks = bundle.masks;
  struct Edge {
    double ratio;
    std::size_t a, b;
  };
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < masks.size(); ++a) {
    for (std::size_t b = a + 1; b < masks.size(); ++b) {
      if (masks[a].view_id == masks[b].view_id) continue;
      if (!same_category(masks[a].category_label, masks[b].category_label)) continue;
      const double ratio = point_overlap_ratio(points[a], points[b], config.voxel_size);
      if (ratio >= config.overlap_threshold && ratio > 0.0) edges.push_back({ratio, a, b});
    }
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.ratio > y.ratio; });

  DisjointSets sets(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) sets.views[i].insert(masks[i].view_id);
  for (const Edge& e : edges) {
    std::size_t ra = sets.find(e.a);
    std::size_t rb = sets.find(e.b);
    if (ra == rb) continue;
    // A track holds at most one mask per view.
    const auto& va = sets.views[ra];
    const auto& vb = sets.views[rb];
    const bool clash = std::any_of(va.begin(), va.end(), [&](int v) { return vb.count(v) > 0; });
    if (clash) continue;
    if (rb < ra) std::swap(ra, rb);
    sets.parent[rb] = ra;
    sets.views[ra].insert(sets.views[rb].begin(), sets.views[rb].end());
  }

  std::map<std::size_t, MaskTrack> by_root;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    MaskTrack& track = by_root[sets.find(i)];
    track.members.push_back(masks[i].ref());
    if (track.category_label.empty()) track.category_label = trim_label(masks[i].category_label);
  }

  std::vector<MaskTrack> tracks;
  for (auto& [root, track] : by_root) {
    std::sort(track.members.begin(), track.members.end());
    if (track.members.size() >= 2 || config.single_view_mode) {
      tracks.push_back(std::move(track));
    } else if (discarded != nullptr) {
      ++*discarded;
    }
  }
  std::sort(tracks.begin(), tracks.end(),
            [](const MaskTrack& x, const MaskTrack& y) { return x.members.front() < y.members.front(); });
  return tracks;
}

}  // namespace

std::vector<MaskTrack> consistent_object_tracks(const SceneBundle& bundle, const ProjectionConfig& config) {
  std::vector<Points3d> points;
  points.reserve(bundle.masks.size());
  for (const auto& m : bundle.masks) points.push_back(mask_points(bundle, m));
  return group_masks(bundle, points, config, nullptr);
}

Eigen::VectorXd average_features(std::span<const Eigen::VectorXd> vectors) {
  if (vectors.empty()) throw EmptyInputError("average_features: empty input");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(vectors.front().size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != sum.size()) throw ShapeError("average_features: vectors differ in dimension");
    if (!(vectors[i].norm() > 0.0)) throw ZeroVectorError("average_features: vector " + std::to_string(i) + " is zero");
    sum += vectors[i];
  }
  const Eigen::VectorXd mean = sum / static_cast<double>(vectors.size());
  const double norm = mean.norm();
  if (!(norm > 0.0)) throw ZeroVectorError("average_features: mean vector is zero");
  return mean / norm;
}

std::string ProjectionDiagnostics::to_text() const {
  std::ostringstream os;
  os << "masks: " << masks_total << "\n"
     << "dropped_pixels: " << dropped_pixels << "\n"
     << "dropped_descriptor_pixels: " << dropped_descriptor_pixels << "\n"
     << "merged_points: " << merged_points << "\n"
     << "merged_descriptors: " << merged_descriptors << "\n"
     << "discarded_single_view_tracks: " << discarded_tracks << "\n"
     << "regions_without_semantics: " << regions_without_semantics << "\n"
     << "mask_groups:\n";
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    os << "  " << i << " " << tracks[i].category_label << ":";
    for (const auto& m : tracks[i].members) os << " (" << m.view_id << "," << m.mask_id << ")";
    os << "\n";
  }
  return os.str();
}

ProjectedScene build_masked_cloud(const SceneBundle& bundle, const ProjectionConfig& config) {
  ProjectedScene out;
  ProjectionDiagnostics& diag = out.diagnostics;
  diag.masks_total = static_cast<int>(bundle.masks.size());

  std::vector<Points3d> mask_pts;
  mask_pts.reserve(bundle.masks.size());
  std::map<MaskRef, std::size_t> mask_index;
  for (std::size_t i = 0; i < bundle.masks.size(); ++i) {
    mask_pts.push_back(mask_points(bundle, bundle.masks[i], &diag.dropped_pixels));
    mask_index[bundle.masks[i].ref()] = i;
  }
  const std::vector<MaskTrack> tracks = group_masks(bundle, mask_pts, config, &diag.discarded_tracks);

  std::vector<Eigen::Vector3d> all_points;
  std::map<MaskRef, int> region_of_mask;
  for (const MaskTrack& track : tracks) {
    std::vector<Eigen::VectorXd> features;
    for (const MaskRef& ref : track.members) {
      if (const SemanticFeature* s = bundle.semantic(ref)) features.push_back(s->vector.cast<double>());
    }
    if (features.empty()) {
      ++diag.regions_without_semantics;
      continue;
    }

    ObjectRegion region;
    region.category_label = track.category_label;
    region.semantic = average_features(features);
    region.source_masks = track.members;

    // Points of later views that duplicate earlier ones within merge_radius are folded.
    VoxelHash seen(config.merge_radius);
    int seen_count = 0;
    for (std::size_t k = 0; k < track.members.size(); ++k) {
      const Points3d& pts = mask_pts[mask_index.at(track.members[k])];
      std::vector<int> added;
      for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        if (k > 0 && seen.any_within(pts.col(i))) {
          ++diag.merged_points;
          continue;
        }
        region.point_indices.push_back(static_cast<int>(all_points.size()));
        added.push_back(static_cast<int>(all_points.size()));
        all_points.push_back(pts.col(i));
      }
      for (int id : added) seen.insert(seen_count++, all_points[id]);
    }
    if (region.point_indices.empty()) continue;

    const int region_id = static_cast<int>(out.cloud.objects.size());
    for (const MaskRef& ref : track.members) region_of_mask[ref] = region_id;
    out.cloud.objects.push_back(std::move(region));
    diag.tracks.push_back(track);
  }
  if (out.cloud.objects.empty()) throw EmptySceneError("no object survived multi-view mask grouping");

  out.cloud.all_points.resize(3, static_cast<Eigen::Index>(all_points.size()));
  for (std::size_t i = 0; i < all_points.size(); ++i) out.cloud.all_points.col(static_cast<Eigen::Index>(i)) = all_points[i];

  // Descriptor points: lift each view, then fold observations from different
  // views that land within merge_radius of each other.
  struct Accumulator {
    Eigen::Vector3d position_sum;
    Eigen::VectorXd descriptor_sum;
    std::set<int> views;
    int count = 0;
    int owner = -1;
  };
  std::vector<Accumulator> acc;
  VoxelHash index(config.merge_radius);
  const int g = bundle.geometric_dim();

  for (const GeometricDescriptorSet& set : bundle.geometric) {
    const DepthFrame& frame = *bundle.frame(set.view_id);
    std::vector<const ObjectMask*> view_masks;
    for (const auto& m : bundle.masks) {
      if (m.view_id == set.view_id && region_of_mask.count(m.ref())) view_masks.push_back(&m);
    }
    const BackProjection bp = back_project(frame, set.pixels.cast<double>());
    diag.dropped_descriptor_pixels += static_cast<int>(bp.dropped.size());
    for (std::size_t k = 0; k < bp.kept.size(); ++k) {
      const int row = bp.kept[k];
      const Eigen::Vector3d p = bp.points.col(static_cast<Eigen::Index>(k));
      const long col_px = std::lround(set.pixels(row, 0));
      const long row_px = std::lround(set.pixels(row, 1));
      int owner = -1;
      for (const ObjectMask* m : view_masks) {
        if (m->mask(row_px, col_px) != 0) {
          owner = region_of_mask.at(m->ref());
          break;
        }
      }
      const Eigen::VectorXd desc = set.descriptors.row(row).cast<double>().transpose();
      const int view = set.view_id;
      const int hit = index.nearest(p, [&](int id) { return acc[id].views.count(view) == 0; });
      if (hit >= 0) {
        Accumulator& a = acc[hit];
        a.position_sum += p;
        a.descriptor_sum += desc;
        a.views.insert(view);
        ++a.count;
        if (a.owner < 0) a.owner = owner;
        ++diag.merged_descriptors;
      } else {
        index.insert(static_cast<int>(acc.size()), p);
        acc.push_back({p, desc, {view}, 1, owner});
      }
    }
  }

  PointDescriptorCloud& cloud = out.descriptors;
  cloud.points.resize(3, static_cast<Eigen::Index>(acc.size()));
  cloud.descriptors.resize(static_cast<Eigen::Index>(acc.size()), g);
  Eigen::Index n = 0;
  for (const Accumulator& a : acc) {
    const double norm = a.descriptor_sum.norm();
    if (!(norm > 0.0)) continue;
    cloud.points.col(n) = a.position_sum / a.count;
    cloud.descriptors.row(n) = a.descriptor_sum.transpose() / norm;
    cloud.object_index.push_back(a.owner);
    ++n;
  }
  cloud.points.conservativeResize(3, n);
  cloud.descriptors.conservativeResize(n, g);
  return out;
}

}  // namespace zeroreg
