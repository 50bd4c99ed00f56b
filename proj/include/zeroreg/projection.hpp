#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "zeroreg/error.hpp"
#include "zeroreg/geometry.hpp"
#include "zeroreg/scene_bundle.hpp"

namespace zeroreg {

/// Result of lifting a list of pixels: one world point per kept pixel.
struct BackProjection {
  Points3d points;
  std::vector<int> kept;     // input index of each column of `points`
  std::vector<int> dropped;  // input indices whose depth was zero/invalid
};

/// Depth sample for pixel (u, v); coordinates are rounded to the nearest cell.
inline float depth_at(const DepthFrame& frame, double u, double v) {
  const long col = std::lround(u);
  const long row = std::lround(v);
  if (col < 0 || row < 0 || col >= frame.depth.cols() || row >= frame.depth.rows()) return 0.0f;
  return frame.depth(row, col);
}

/// Pinhole back-projection of (u, v) at depth z, then camera-to-world.
inline Eigen::Vector3d back_project_pixel(const DepthFrame& frame, double u, double v, double z) {
  const auto& k = frame.intrinsics;
  const Eigen::Vector3d cam((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z);
  return frame.pose(cam);
}

/// Forward projection of a world point to (u, v, z) in the frame's camera.
inline Eigen::Vector3d project_point(const DepthFrame& frame, const Eigen::Vector3d& world) {
  const auto& k = frame.intrinsics;
  const Eigen::Vector3d cam = frame.pose.inverse()(world);
  return {k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy, cam.z()};
}

/// `pixels` is n x 2 with (u, v) rows. Pixels with zero depth are reported in
/// `dropped`, not thrown.
template <typename Derived>
BackProjection back_project(const DepthFrame& frame, const Eigen::MatrixBase<Derived>& pixels) {
  BackProjection out;
  out.points.resize(3, pixels.rows());
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < pixels.rows(); ++i) {
    const double u = pixels(i, 0);
    const double v = pixels(i, 1);
    const float z = depth_at(frame, u, v);
    if (!(z > 0.0f) || !std::isfinite(z)) {
      out.dropped.push_back(static_cast<int>(i));
      continue;
    }
    out.points.col(n++) = back_project_pixel(frame, u, v, z);
    out.kept.push_back(static_cast<int>(i));
  }
  out.points.conservativeResize(3, n);
  return out;
}

struct ProjectionConfig {
  double overlap_threshold = 0.3;  // cross-view grouping ratio
  double voxel_size = 0.05;        // meters; overlap test radius
  double merge_radius = 0.02;      // meters; cross-view point / descriptor merge
  bool single_view_mode = false;   // keep objects seen in one view only
};

/// Masks across views that refer to one physical object.
struct MaskTrack {
  std::vector<MaskRef> members;  // sorted, at most one per view
  std::string category_label;
};

/// Groups equal-label masks from different views whose back-projected points
/// overlap (ratio over the smaller mask >= threshold). Tracks with a single
/// member are discarded unless single-view mode is on.
std::vector<MaskTrack> consistent_object_tracks(const SceneBundle& bundle, const ProjectionConfig& config);

inline std::vector<MaskTrack> consistent_object_tracks(const SceneBundle& bundle, double overlap_threshold) {
  ProjectionConfig config;
  config.overlap_threshold = overlap_threshold;
  return consistent_object_tracks(bundle, config);
}

/// Fraction of the smaller mask's points lying within `radius` of the other's.
double point_overlap_ratio(const Points3d& a, const Points3d& b, double radius);

/// Arithmetic mean renormalized to unit length.
Eigen::VectorXd average_features(std::span<const Eigen::VectorXd> vectors);

struct ObjectRegion {
  std::vector<int> point_indices;
  std::string category_label;
  Eigen::VectorXd semantic;  // unified, unit length
  std::vector<MaskRef> source_masks;
};

struct MaskedPointCloud {
  std::vector<ObjectRegion> objects;
  Points3d all_points;
};

struct PointDescriptorCloud {
  Points3d points;
  Eigen::MatrixXd descriptors;    // L x g, unit rows
  std::vector<int> object_index;  // owning region, -1 when outside every region

  Eigen::Index size() const { return points.cols(); }
};

struct ProjectionDiagnostics {
  int masks_total = 0;
  int dropped_pixels = 0;             // zero-depth mask pixels
  int dropped_descriptor_pixels = 0;  // zero-depth descriptor pixels
  int merged_points = 0;              // duplicate cross-view points removed
  int merged_descriptors = 0;         // descriptor observations folded into another
  int discarded_tracks = 0;           // single-view tracks removed
  int regions_without_semantics = 0;
  std::vector<MaskTrack> tracks;      // surviving groups, region order

  std::string to_text() const;
};

struct ProjectedScene {
  MaskedPointCloud cloud;
  PointDescriptorCloud descriptors;
  ProjectionDiagnostics diagnostics;
};

/// Lifts a bundle to the masked point cloud and descriptor cloud. Throws
/// EmptySceneError when no mask group survives.
ProjectedScene build_masked_cloud(const SceneBundle& bundle, const ProjectionConfig& config);

/// World points of every true, valid-depth pixel of a mask.
Points3d mask_points(const SceneBundle& bundle, const ObjectMask& mask, int* dropped = nullptr);

}  // namespace zeroreg
