#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "zeroreg/geometry.hpp"
#include "zeroreg/object_matching.hpp"
#include "zeroreg/scene_bundle.hpp"

namespace zeroreg {

/// Parameters of one synthetic source/target pair.
struct SceneSpec {
  int object_count = 5;
  int duplicates_per_category = 1;  // instances of the duplicated category
  int points_per_object = 600;      // rendered surface samples
  int keypoints_per_object = 60;    // samples carrying geometric descriptors
  int view_count = 3;
  double overlap_ratio = 1.0;       // fraction of objects present in both fragments
  // Noise magnitudes are relative to unit vectors: the isotropic perturbation
  // has per-component std sigma / sqrt(dim), so its expected norm is ~sigma.
  double semantic_noise_sigma = 0.05;
  double descriptor_noise_sigma = 0.05;
  double depth_noise_sigma = 0.005;  // meters
  int outlier_mask_count = 0;        // single-view false detections per side
  std::uint64_t seed = 0;

  int semantic_dim = 512;
  int geometric_dim = 128;
  int image_width = 320;
  int image_height = 240;
  double focal_length = 260.0;
  double depth_quantization = 1e-4;  // meters
  double max_rotation_deg = 180.0;
  double max_translation = 2.0;  // meters
  double view_spacing_deg = 20.0;
};

struct GroundTruth {
  RigidTransformd transform;              // source frame -> target frame
  std::vector<IndexPair> object_pairs;    // (source object, target object)
  std::vector<IndexPair> point_pairs;     // (source keypoint, target keypoint)
  Points3d source_keypoints;              // true positions, source frame
  Points3d target_keypoints;              // true positions, target frame
  Points3d overlap_points;                // source frame, objects present on both sides
  std::vector<std::pair<MaskRef, int>> source_mask_objects;  // mask -> source object (-1 for spurious)
  std::vector<std::pair<MaskRef, int>> target_mask_objects;
  std::vector<std::string> source_object_labels;
  std::vector<std::string> target_object_labels;

  int source_object_of(MaskRef ref) const;
  int target_object_of(MaskRef ref) const;
};

struct GeneratedPair {
  SceneBundle source;
  SceneBundle target;
  GroundTruth truth;
};

/// Fixed indoor category vocabulary.
const std::vector<std::string>& category_vocabulary();

/// Unit prototype semantic vector of a vocabulary entry (fixed per dimension).
Eigen::VectorXd category_prototype(int category, int dim);

/// Deterministic pair per spec.seed. Throws GenerationError on invalid or
/// infeasible specs.
GeneratedPair generate_pair(const SceneSpec& spec);

using PixelIndexImage = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RenderResult {
  DepthFrame frame;
  PixelIndexImage winner;  // index of the point owning each pixel, -1 when unhit
};

/// Z-buffered pinhole rendering: each point lands on its nearest pixel and the
/// nearest point per pixel wins. Depth is rounded to `quantization` when > 0.
/// Throws EmptyRenderError when no point is visible.
RenderResult render_depth_indexed(const Points3d& points, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                                  int view_id = 0, double quantization = 0.0);

DepthFrame render_depth(const Points3d& points, const CameraIntrinsics& intrinsics, const CameraPose& pose);

/// Camera-to-world pose at `eye` looking at `target` (x right, y down, z forward).
CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up);

/// Ranges sampled per pair on top of a base spec.
struct SuiteSpec {
  SceneSpec base;
  int object_count_min = 3, object_count_max = 8;
  int duplicates_min = 1, duplicates_max = 3;
  double overlap_min = 0.4, overlap_max = 1.0;
};

/// The benchmark default: 3-8 objects, up to 3 duplicates, overlap 0.4-1.0,
/// 5 mm depth noise.
SuiteSpec default_suite_spec();

/// Spec of pair `index`: ranges drawn from the stream (base.seed, index); the
/// pair seed is derived from the same stream.
SceneSpec sample_scene_spec(const SuiteSpec& suite, int index);

/// JSON form: SceneSpec fields by name; object_count, duplicates_per_category
/// and overlap_ratio may be a number or a [min, max] range. Unknown keys are
/// rejected with ValidationError.
SuiteSpec parse_suite_spec(const std::string& json_text);

std::string ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const std::string& json_text);

/// `<dir>/source`, `<dir>/target`, `<dir>/gt.json`.
void write_pair(const GeneratedPair& pair, const std::filesystem::path& dir);
GeneratedPair read_pair(const std::filesystem::path& dir);

}  // namespace zeroreg
