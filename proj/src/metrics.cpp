#include "zeroreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zeroreg/error.hpp"
#include "zeroreg/point_matching.hpp"
#include "zeroreg/projection.hpp"

namespace zeroreg {

double rmse(const RigidTransformd& estimate, const RigidTransformd& truth, const Points3d& points) {
  if (points.cols() == 0) throw EmptyInputError("rmse: empty point set");
  const Points3d diff = estimate.apply(points) - truth.apply(points);
  return std::sqrt(diff.colwise().squaredNorm().mean());
}

double registration_recall(std::span<const PairEvaluation> evals) {
  if (evals.empty()) throw EmptyInputError("registration_recall: no evaluations");
  const auto hits = std::count_if(evals.begin(), evals.end(), [](const PairEvaluation& e) { return e.registered; });
  return static_cast<double>(hits) / static_cast<double>(evals.size());
}

double inlier_ratio(const Points3d& source, const Points3d& target, const RigidTransformd& truth, double tau) {
  if (source.cols() != target.cols()) throw ShapeError("inlier_ratio: unpaired inputs");
  if (source.cols() == 0) throw EmptyInputError("inlier_ratio: no correspondences");
  const Eigen::RowVectorXd dist = (truth.apply(source) - target).colwise().norm();
  return (dist.array() < tau).cast<double>().mean();
}

double inlier_ratio(const PointCorrespondences& corr, const PointDescriptorCloud& source,
                    const PointDescriptorCloud& target, const RigidTransformd& truth, double tau) {
  Points3d p(3, static_cast<Eigen::Index>(corr.size()));
  Points3d q(3, static_cast<Eigen::Index>(corr.size()));
  for (std::size_t i = 0; i < corr.size(); ++i) {
    p.col(static_cast<Eigen::Index>(i)) = source.points.col(corr.pairs[i].source);
    q.col(static_cast<Eigen::Index>(i)) = target.points.col(corr.pairs[i].target);
  }
  return inlier_ratio(p, q, truth, tau);
}

std::pair<double, double> rotation_translation_error(const RigidTransformd& estimate, const RigidTransformd& truth) {
  // Same angle as acos((tr - 1) / 2), without the acos precision floor near zero.
  const Eigen::Matrix3d r = truth.rotation.transpose() * estimate.rotation;
  const double cosine = (r.trace() - 1.0) / 2.0;
  const double sine = Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm() / 2.0;
  return {rad2deg(std::atan2(sine, cosine)), (estimate.translation - truth.translation).norm()};
}

PairEvaluation evaluate_pair(const RigidTransformd& estimate, const RigidTransformd& truth,
                             const Points3d& overlap_points, double inlier_ratio_value, double rmse_threshold) {
  PairEvaluation e;
  e.rmse = rmse(estimate, truth, overlap_points);
  e.registered = e.rmse < rmse_threshold;
  e.inlier_ratio = inlier_ratio_value;
  std::tie(e.rotation_error, e.translation_error) = rotation_translation_error(estimate, truth);
  return e;
}

double accuracy_at(std::span<const double> values, double threshold) {
  if (values.empty()) return 0.0;
  const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v < threshold; });
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace zeroreg
