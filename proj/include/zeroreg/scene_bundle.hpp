#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "zeroreg/geometry.hpp"

namespace zeroreg {

using DepthImage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskImage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PixelArray = Eigen::Matrix<float, Eigen::Dynamic, 2, Eigen::RowMajor>;
using FeatureMatrixf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct CameraIntrinsics {
  double fx = 0;
  double fy = 0;
  double cx = 0;
  double cy = 0;
  int width = 0;
  int height = 0;

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Camera-to-world pose.
using CameraPose = RigidTransformd;

struct DepthFrame {
  int view_id = 0;
  CameraIntrinsics intrinsics;
  CameraPose pose;
  DepthImage depth;  // meters, 0 = invalid
};

struct MaskRef {
  int view_id = 0;
  int mask_id = 0;

  auto operator<=>(const MaskRef&) const = default;
};

struct ObjectMask {
  int view_id = 0;
  int mask_id = 0;
  std::string category_label;
  MaskImage mask;  // 0/1

  MaskRef ref() const { return {view_id, mask_id}; }
};

struct SemanticFeature {
  MaskRef mask_ref;
  Eigen::VectorXf vector;
};

struct GeometricDescriptorSet {
  int view_id = 0;
  PixelArray pixels;           // (u, v) per row
  FeatureMatrixf descriptors;  // unit rows
};

struct SceneBundle {
  std::string bundle_id;
  std::vector<DepthFrame> frames;
  std::vector<ObjectMask> masks;
  std::vector<SemanticFeature> semantic_features;
  std::vector<GeometricDescriptorSet> geometric;

  /// Feature dimensions; 0 when the bundle carries no features of that kind.
  int semantic_dim() const;
  int geometric_dim() const;

  const DepthFrame* frame(int view_id) const;
  const ObjectMask* mask(MaskRef ref) const;
  const SemanticFeature* semantic(MaskRef ref) const;
};

bool operator==(const DepthFrame& a, const DepthFrame& b);
bool operator==(const ObjectMask& a, const ObjectMask& b);
bool operator==(const SemanticFeature& a, const SemanticFeature& b);
bool operator==(const GeometricDescriptorSet& a, const GeometricDescriptorSet& b);
bool operator==(const SceneBundle& a, const SceneBundle& b);

/// Labels compare by exact string equality after trimming surrounding whitespace.
std::string trim_label(std::string_view label);
bool same_category(std::string_view a, std::string_view b);

/// Tolerance used when checking descriptor rows for unit length (f32 storage).
inline constexpr double kUnitNormTolerance = 1e-3;

/// Checks every invariant of the contained types; throws ValidationError naming
/// the offending field.
void validate_bundle(const SceneBundle& bundle);

/// Writes manifest.json plus one raw little-endian tensor file per payload.
/// Throws WriteError with the failing path.
void write_bundle(const SceneBundle& bundle, const std::filesystem::path& directory);

/// Reads and validates a bundle. FormatError for missing files and shape
/// mismatches, ValidationError for invariant violations.
SceneBundle read_bundle(const std::filesystem::path& directory);

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace zeroreg
