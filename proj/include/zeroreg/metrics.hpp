#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zeroreg/geometry.hpp"

namespace zeroreg {

struct PointCorrespondences;
struct PointDescriptorCloud;

inline constexpr double kRegistrationRmseThreshold = 0.2;  // meters
inline constexpr double kInlierDistance = 0.1;             // meters

struct PairEvaluation {
  double rmse = 0.0;               // meters
  bool registered = false;         // rmse < threshold
  double inlier_ratio = 0.0;       // [0, 1]
  double rotation_error = 0.0;     // degrees
  double translation_error = 0.0;  // meters
};

/// Root mean square displacement between the two transforms' images of the points.
double rmse(const RigidTransformd& estimate, const RigidTransformd& truth, const Points3d& points);

/// Fraction of evaluations marked registered.
double registration_recall(std::span<const PairEvaluation> evals);

/// Fraction of (p, q) pairs with ||T(p) - q|| < tau. `source`/`target` are 3 x N, paired by column.
double inlier_ratio(const Points3d& source, const Points3d& target, const RigidTransformd& truth,
                    double tau = kInlierDistance);

double inlier_ratio(const PointCorrespondences& corr, const PointDescriptorCloud& source,
                    const PointDescriptorCloud& target, const RigidTransformd& truth, double tau = kInlierDistance);

/// Geodesic rotation angle (degrees) and translation distance (meters).
std::pair<double, double> rotation_translation_error(const RigidTransformd& estimate, const RigidTransformd& truth);

PairEvaluation evaluate_pair(const RigidTransformd& estimate, const RigidTransformd& truth,
                             const Points3d& overlap_points, double inlier_ratio_value,
                             double rmse_threshold = kRegistrationRmseThreshold);

/// Fraction of values strictly below `threshold`.
double accuracy_at(std::span<const double> values, double threshold);

double mean_of(std::span<const double> values);
double median_of(std::vector<double> values);

}  // namespace zeroreg
