#include "zeroreg/scene_bundle.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "zeroreg/error.hpp"

namespace zeroreg {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "tensor IO assumes a little-endian host");

int SceneBundle::semantic_dim() const {
  return semantic_features.empty() ? 0 : static_cast<int>(semantic_features.front().vector.size());
}

int SceneBundle::geometric_dim() const {
  for (const auto& set : geometric) {
    if (set.descriptors.rows() > 0 || set.descriptors.cols() > 0) {
      return static_cast<int>(set.descriptors.cols());
    }
  }
  return 0;
}

const DepthFrame* SceneBundle::frame(int view_id) const {
  for (const auto& f : frames) {
    if (f.view_id == view_id) return &f;
  }
  return nullptr;
}

const ObjectMask* SceneBundle::mask(MaskRef ref) const {
  for (const auto& m : masks) {
    if (m.ref() == ref) return &m;
  }
  return nullptr;
}

const SemanticFeature* SceneBundle::semantic(MaskRef ref) const {
  for (const auto& s : semantic_features) {
    if (s.mask_ref == ref) return &s;
  }
  return nullptr;
}

namespace {

template <typename A, typename B>
bool same_tensor(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  using Elem = typename A::Scalar;
  return a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(Elem) * a.size()) == 0;
}

}  // namespace

bool operator==(const DepthFrame& a, const DepthFrame& b) {
  return a.view_id == b.view_id && a.intrinsics == b.intrinsics &&
         a.pose.rotation == b.pose.rotation && a.pose.translation == b.pose.translation &&
         same_tensor(a.depth, b.depth);
}

bool operator==(const ObjectMask& a, const ObjectMask& b) {
  return a.view_id == b.view_id && a.mask_id == b.mask_id &&
         a.category_label == b.category_label && same_tensor(a.mask, b.mask);
}

bool operator==(const SemanticFeature& a, const SemanticFeature& b) {
  return a.mask_ref == b.mask_ref && same_tensor(a.vector, b.vector);
}

bool operator==(const GeometricDescriptorSet& a, const GeometricDescriptorSet& b) {
  return a.view_id == b.view_id && same_tensor(a.pixels, b.pixels) &&
         same_tensor(a.descriptors, b.descriptors);
}

bool operator==(const SceneBundle& a, const SceneBundle& b) {
  return a.bundle_id == b.bundle_id && a.frames == b.frames && a.masks == b.masks &&
         a.semantic_features == b.semantic_features && a.geometric == b.geometric;
}

std::string trim_label(std::string_view label) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto begin = std::find_if_not(label.begin(), label.end(), is_space);
  auto end = std::find_if_not(label.rbegin(), std::string_view::reverse_iterator(begin), is_space).base();
  return std::string(begin, end);
}

bool same_category(std::string_view a, std::string_view b) { return trim_label(a) == trim_label(b); }

// ---------------------------------------------------------------------------
// Validation

namespace {

std::string frame_field(std::size_t i, const char* name) {
  return "frames[" + std::to_string(i) + "]." + name;
}

std::string mask_field(std::size_t i, const char* name) {
  return "masks[" + std::to_string(i) + "]." + name;
}

}  // namespace

void validate_bundle(const SceneBundle& bundle) {
  if (bundle.frames.empty()) throw ValidationError("frames", "bundle has no depth frames");

  std::set<int> views;
  for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
    const DepthFrame& f = bundle.frames[i];
    if (!views.insert(f.view_id).second) {
      throw ValidationError(frame_field(i, "view_id"), "duplicate view id " + std::to_string(f.view_id));
    }
    const CameraIntrinsics& k = f.intrinsics;
    if (!(k.fx > 0) || !std::isfinite(k.fx)) throw ValidationError(frame_field(i, "intrinsics.fx"), "must be > 0");
    if (!(k.fy > 0) || !std::isfinite(k.fy)) throw ValidationError(frame_field(i, "intrinsics.fy"), "must be > 0");
    if (k.width <= 0 || k.height <= 0) throw ValidationError(frame_field(i, "intrinsics.width"), "image size must be positive");
    if (!(k.cx >= 0 && k.cx < k.width)) throw ValidationError(frame_field(i, "intrinsics.cx"), "must lie in [0, width)");
    if (!(k.cy >= 0 && k.cy < k.height)) throw ValidationError(frame_field(i, "intrinsics.cy"), "must lie in [0, height)");
    if (!f.pose.isValid(1e-6)) throw ValidationError(frame_field(i, "pose"), "rotation is not a proper orthonormal matrix");
    if (f.depth.rows() != k.height || f.depth.cols() != k.width) {
      throw ValidationError(frame_field(i, "depth"), "dimensions do not match intrinsics");
    }
    for (Eigen::Index p = 0; p < f.depth.size(); ++p) {
      const float d = f.depth.data()[p];
      if (!std::isfinite(d) || d < 0.0f) throw ValidationError(frame_field(i, "depth"), "values must be finite and >= 0");
    }
  }

  std::set<MaskRef> mask_refs;
  for (std::size_t i = 0; i < bundle.masks.size(); ++i) {
    const ObjectMask& m = bundle.masks[i];
    const DepthFrame* f = bundle.frame(m.view_id);
    if (f == nullptr) throw ValidationError(mask_field(i, "view_id"), "no frame with view id " + std::to_string(m.view_id));
    if (!mask_refs.insert(m.ref()).second) throw ValidationError(mask_field(i, "mask_id"), "duplicate mask id within view");
    if (trim_label(m.category_label).empty()) throw ValidationError(mask_field(i, "category_label"), "must be nonempty");
    if (m.mask.rows() != f->intrinsics.height || m.mask.cols() != f->intrinsics.width) {
      throw ValidationError(mask_field(i, "mask"), "dimensions do not match the frame");
    }
    bool any = false;
    for (Eigen::Index p = 0; p < m.mask.size(); ++p) {
      const auto v = m.mask.data()[p];
      if (v > 1) throw ValidationError(mask_field(i, "mask"), "values must be 0 or 1");
      any = any || v == 1;
    }
    if (!any) throw ValidationError(mask_field(i, "mask"), "mask has no true pixels");
  }

  const int d = bundle.semantic_dim();
  for (std::size_t i = 0; i < bundle.semantic_features.size(); ++i) {
    const SemanticFeature& s = bundle.semantic_features[i];
    const std::string field = "semantic_features[" + std::to_string(i) + "]";
    if (!mask_refs.count(s.mask_ref)) throw ValidationError(field + ".mask_ref", "does not resolve to a mask");
    if (s.vector.size() != d || d == 0) throw ValidationError(field + ".vector", "dimension differs from semantic_dim");
    if (!s.vector.allFinite() || !(s.vector.norm() > 0.0f)) throw ValidationError(field + ".vector", "norm must be > 0");
  }

  const int g = bundle.geometric_dim();
  for (std::size_t i = 0; i < bundle.geometric.size(); ++i) {
    const GeometricDescriptorSet& set = bundle.geometric[i];
    const std::string field = "geometric_sets[" + std::to_string(i) + "]";
    const DepthFrame* f = bundle.frame(set.view_id);
    if (f == nullptr) throw ValidationError(field + ".view_id", "no frame with view id " + std::to_string(set.view_id));
    if (set.descriptors.rows() != set.pixels.rows()) throw ValidationError(field + ".descriptors", "row count differs from pixels");
    if (set.descriptors.cols() != g) throw ValidationError(field + ".descriptors", "dimension differs from geometric_dim");
    for (Eigen::Index r = 0; r < set.pixels.rows(); ++r) {
      // Pixels index the depth image after rounding to the nearest integer.
      const double u = std::round(set.pixels(r, 0));
      const double v = std::round(set.pixels(r, 1));
      if (!std::isfinite(set.pixels(r, 0)) || !std::isfinite(set.pixels(r, 1)) || u < 0 || v < 0 ||
          u >= f->intrinsics.width || v >= f->intrinsics.height) {
        throw ValidationError(field + ".pixels", "row " + std::to_string(r) + " outside image bounds");
      }
      const double norm = set.descriptors.row(r).template cast<double>().norm();
      if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
        throw ValidationError(field + ".descriptors", "row " + std::to_string(r) + " is not unit length");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// IO

namespace {

struct TensorEntry {
  std::string name;
  std::string file;
  std::string dtype;
  std::vector<std::int64_t> shape;
};

json to_json(const TensorEntry& e) {
  return json{{"name", e.name}, {"file", e.file}, {"dtype", e.dtype}, {"shape", e.shape}};
}

template <typename Derived>
TensorEntry write_tensor(const fs::path& dir, const std::string& name, const Eigen::DenseBase<Derived>& t) {
  using Elem = typename Derived::Scalar;
  static_assert(std::is_same_v<Elem, float> || std::is_same_v<Elem, std::uint8_t>);
  static_assert(Derived::IsRowMajor || Derived::ColsAtCompileTime == 1, "tensors are written row-major");
  TensorEntry entry;
  entry.name = name;
  entry.dtype = std::is_same_v<Elem, float> ? "f32" : "u8";
  entry.file = name + "." + entry.dtype;
  if constexpr (Derived::ColsAtCompileTime == 1) {
    entry.shape = {static_cast<std::int64_t>(t.rows())};
  } else {
    entry.shape = {static_cast<std::int64_t>(t.rows()), static_cast<std::int64_t>(t.cols())};
  }
  const fs::path path = dir / entry.file;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(t.derived().data()),
            static_cast<std::streamsize>(sizeof(Elem) * t.size()));
  if (!out) throw WriteError(path.string(), "write failed");
  return entry;
}

json pose_json(const CameraPose& pose) {
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i * 3 + j] = pose.rotation(i, j);
  }
  return json{{"rotation", r}, {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

}  // namespace

void write_bundle(const SceneBundle& bundle, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw WriteError(directory.string(), ec.message());

  json manifest;
  manifest["format_version"] = 1;
  manifest["bundle_id"] = bundle.bundle_id;
  manifest["semantic_dim"] = bundle.semantic_dim();
  manifest["geometric_dim"] = bundle.geometric_dim();

  json frames = json::array();
  for (const auto& f : bundle.frames) {
    const std::string tag = "v" + std::to_string(f.view_id);
    const auto& k = f.intrinsics;
    frames.push_back({{"view_id", f.view_id},
                      {"intrinsics",
                       {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
                      {"pose", pose_json(f.pose)},
                      {"depth", to_json(write_tensor(directory, "depth_" + tag, f.depth))}});
  }
  manifest["frames"] = std::move(frames);

  json masks = json::array();
  for (const auto& m : bundle.masks) {
    const std::string tag = "v" + std::to_string(m.view_id) + "_m" + std::to_string(m.mask_id);
    masks.push_back({{"view_id", m.view_id},
                     {"mask_id", m.mask_id},
                     {"category_label", m.category_label},
                     {"mask", to_json(write_tensor(directory, "mask_" + tag, m.mask))}});
  }
  manifest["masks"] = std::move(masks);

  json semantics = json::array();
  for (const auto& s : bundle.semantic_features) {
    const std::string tag = "v" + std::to_string(s.mask_ref.view_id) + "_m" + std::to_string(s.mask_ref.mask_id);
    semantics.push_back({{"view_id", s.mask_ref.view_id},
                         {"mask_id", s.mask_ref.mask_id},
                         {"vector", to_json(write_tensor(directory, "semantic_" + tag, s.vector))}});
  }
  manifest["semantic_features"] = std::move(semantics);

  json geometric = json::array();
  for (std::size_t i = 0; i < bundle.geometric.size(); ++i) {
    const auto& g = bundle.geometric[i];
    const std::string tag = "v" + std::to_string(g.view_id) + "_" + std::to_string(i);
    geometric.push_back({{"view_id", g.view_id},
                         {"pixels", to_json(write_tensor(directory, "geo_pixels_" + tag, g.pixels))},
                         {"descriptors", to_json(write_tensor(directory, "geo_desc_" + tag, g.descriptors))}});
  }
  manifest["geometric_sets"] = std::move(geometric);

  const fs::path path = directory / kManifestName;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw WriteError(path.string(), "cannot open for writing");
  out << manifest.dump(2) << '\n';
  if (!out) throw WriteError(path.string(), "write failed");
}

namespace {

class ManifestReader {
 public:
  explicit ManifestReader(fs::path dir) : dir_(std::move(dir)) {}

  template <typename T>
  T get(const json& obj, const char* key, const std::string& where) const {
    if (!obj.is_object() || !obj.contains(key)) throw FormatError(where + ": missing key '" + key + "'");
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw FormatError(where + "." + key + ": " + e.what());
    }
  }

  const json& array(const json& obj, const char* key) const {
    if (!obj.contains(key) || !obj.at(key).is_array()) {
      throw FormatError(std::string("manifest: '") + key + "' must be an array");
    }
    return obj.at(key);
  }

  // Reads a tensor whose shape must equal `expected` (-1 matches any extent).
  template <typename Tensor>
  Tensor tensor(const json& entry_json, const std::string& where, const char* dtype,
                std::vector<std::int64_t> expected) const {
    using Elem = typename Tensor::Scalar;
    const auto file = get<std::string>(entry_json, "file", where);
    const auto type = get<std::string>(entry_json, "dtype", where);
    const auto shape = get<std::vector<std::int64_t>>(entry_json, "shape", where);
    if (type != dtype) throw FormatError(where + ": dtype '" + type + "', expected '" + dtype + "'");
    if (shape.size() != expected.size()) throw FormatError(where + ": tensor rank mismatch");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] < 0 || (expected[i] >= 0 && shape[i] != expected[i])) {
        throw FormatError(where + ": shape mismatch against manifest");
      }
    }
    if (file.find('/') != std::string::npos || file.find("..") != std::string::npos) {
      throw FormatError(where + ": tensor file must be a sibling of the manifest");
    }
    const fs::path path = dir_ / file;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": missing tensor file");
    std::int64_t count = 1;
    for (auto s : shape) count *= s;
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec || size != static_cast<std::uintmax_t>(count) * sizeof(Elem)) {
      throw FormatError(path.string() + ": holds " + std::to_string(size / sizeof(Elem)) +
                        " elements, manifest shape needs " + std::to_string(count));
    }
    Tensor t;
    if constexpr (Tensor::ColsAtCompileTime == 1) {
      t.resize(shape[0]);
    } else {
      t.resize(shape[0], shape[1]);
    }
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(Elem) * count));
    if (!in) throw FormatError(path.string() + ": short read");
    return t;
  }

 private:
  fs::path dir_;
};

}  // namespace

SceneBundle read_bundle(const fs::path& directory) {
  const fs::path manifest_path = directory / kManifestName;
  std::ifstream in(manifest_path);
  if (!in) throw FormatError(manifest_path.string() + ": missing manifest");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  const ManifestReader reader(directory);
  SceneBundle bundle;
  bundle.bundle_id = reader.get<std::string>(manifest, "bundle_id", "manifest");
  const auto semantic_dim = reader.get<std::int64_t>(manifest, "semantic_dim", "manifest");
  const auto geometric_dim = reader.get<std::int64_t>(manifest, "geometric_dim", "manifest");

  const json& frames = reader.array(manifest, "frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& fj = frames[i];
    const std::string where = "frames[" + std::to_string(i) + "]";
    DepthFrame f;
    f.view_id = reader.get<int>(fj, "view_id", where);
    const json intr = reader.get<json>(fj, "intrinsics", where);
    f.intrinsics.fx = reader.get<double>(intr, "fx", where + ".intrinsics");
    f.intrinsics.fy = reader.get<double>(intr, "fy", where + ".intrinsics");
    f.intrinsics.cx = reader.get<double>(intr, "cx", where + ".intrinsics");
    f.intrinsics.cy = reader.get<double>(intr, "cy", where + ".intrinsics");
    f.intrinsics.width = reader.get<int>(intr, "width", where + ".intrinsics");
    f.intrinsics.height = reader.get<int>(intr, "height", where + ".intrinsics");
    const json pose = reader.get<json>(fj, "pose", where);
    const auto r = reader.get<std::vector<double>>(pose, "rotation", where + ".pose");
    const auto t = reader.get<std::vector<double>>(pose, "translation", where + ".pose");
    if (r.size() != 9 || t.size() != 3) throw FormatError(where + ".pose: expected 9 rotation and 3 translation values");
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) f.pose.rotation(a, b) = r[a * 3 + b];
      f.pose.translation(a) = t[a];
    }
    f.depth = reader.tensor<DepthImage>(reader.get<json>(fj, "depth", where), where + ".depth", "f32",
                                        {f.intrinsics.height, f.intrinsics.width});
    bundle.frames.push_back(std::move(f));
  }

  const json& masks = reader.array(manifest, "masks");
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const json& mj = masks[i];
    const std::string where = "masks[" + std::to_string(i) + "]";
    ObjectMask m;
    m.view_id = reader.get<int>(mj, "view_id", where);
    m.mask_id = reader.get<int>(mj, "mask_id", where);
    m.category_label = reader.get<std::string>(mj, "category_label", where);
    const DepthFrame* f = bundle.frame(m.view_id);
    const std::int64_t h = f ? f->intrinsics.height : -1;
    const std::int64_t w = f ? f->intrinsics.width : -1;
    m.mask = reader.tensor<MaskImage>(reader.get<json>(mj, "mask", where), where + ".mask", "u8", {h, w});
    bundle.masks.push_back(std::move(m));
  }

  const json& semantics = reader.array(manifest, "semantic_features");
  for (std::size_t i = 0; i < semantics.size(); ++i) {
    const json& sj = semantics[i];
    const std::string where = "semantic_features[" + std::to_string(i) + "]";
    SemanticFeature s;
    s.mask_ref.view_id = reader.get<int>(sj, "view_id", where);
    s.mask_ref.mask_id = reader.get<int>(sj, "mask_id", where);
    s.vector = reader.tensor<Eigen::VectorXf>(reader.get<json>(sj, "vector", where), where + ".vector", "f32",
                                              {semantic_dim});
    bundle.semantic_features.push_back(std::move(s));
  }

  const json& geometric = reader.array(manifest, "geometric_sets");
  for (std::size_t i = 0; i < geometric.size(); ++i) {
    const json& gj = geometric[i];
    const std::string where = "geometric_sets[" + std::to_string(i) + "]";
    GeometricDescriptorSet g;
    g.view_id = reader.get<int>(gj, "view_id", where);
    g.pixels = reader.tensor<PixelArray>(reader.get<json>(gj, "pixels", where), where + ".pixels", "f32", {-1, 2});
    g.descriptors = reader.tensor<FeatureMatrixf>(reader.get<json>(gj, "descriptors", where), where + ".descriptors",
                                                  "f32", {g.pixels.rows(), geometric_dim});
    bundle.geometric.push_back(std::move(g));
  }

  validate_bundle(bundle);
  return bundle;
}

}  // namespace zeroreg
