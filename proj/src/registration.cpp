#include "zeroreg/registration.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "zeroreg/point_matching.hpp"
#include "zeroreg/projection.hpp"
#include "zeroreg/rng.hpp"

namespace zeroreg {

int ransac_required_iterations(double inlier_ratio, double confidence, int sample_size) {
  if (inlier_ratio <= 0.0) return std::numeric_limits<int>::max();
  const double all_inlier = std::pow(inlier_ratio, sample_size);
  if (all_inlier >= 1.0) return 1;
  const double needed = std::log(1.0 - confidence) / std::log(1.0 - all_inlier);
  if (!std::isfinite(needed) || needed > static_cast<double>(std::numeric_limits<int>::max())) {
    return std::numeric_limits<int>::max();
  }
  return std::max(1, static_cast<int>(std::ceil(needed)));
}

namespace {

std::vector<int> inliers_of(const RigidTransformd& t, const Points3d& source, const Points3d& target,
                            double threshold) {
  const Eigen::RowVectorXd residual = (t.apply(source) - target).colwise().norm();
  std::vector<int> out;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    if (residual(i) < threshold) out.push_back(static_cast<int>(i));
  }
  return out;
}

Points3d gather(const Points3d& pts, const std::vector<int>& idx) {
  Points3d out(3, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts.col(idx[i]);
  return out;
}

}  // namespace

RansacResult ransac_register(const Points3d& source, const Points3d& target, const RansacOptions& options) {
  if (source.cols() != target.cols()) throw ShapeError("ransac_register: source and target counts differ");
  const Eigen::Index n = source.cols();
  if (n < 3) throw InsufficientDataError("ransac_register: need at least 3 correspondences");

  RansacResult result;
  std::size_t best_count = 0;
  RigidTransformd best_model;
  int needed = options.max_iterations;
  int it = 0;
  for (; it < options.max_iterations && it < needed; ++it) {
    CounterRng rng(options.seed, static_cast<std::uint64_t>(it));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::Index idx[3];
    idx[0] = pick(rng);
    do idx[1] = pick(rng); while (idx[1] == idx[0]);
    do idx[2] = pick(rng); while (idx[2] == idx[0] || idx[2] == idx[1]);

    Eigen::Matrix3d p, q;
    for (int k = 0; k < 3; ++k) {
      p.col(k) = source.col(idx[k]);
      q.col(k) = target.col(idx[k]);
    }
    RigidTransformd model;
    try {
      model = fit_rigid(p, q);
    } catch (const DegenerateConfigError&) {
      continue;
    }
    const std::size_t count = inliers_of(model, source, target, options.inlier_threshold).size();
    if (count > best_count) {
      best_count = count;
      best_model = model;
      needed = std::min(options.max_iterations,
                        ransac_required_iterations(static_cast<double>(count) / static_cast<double>(n),
                                                   options.confidence));
    }
  }
  result.iterations_run = it;
  if (best_count == 0) throw NoConsensusError("ransac_register: no hypothesis gathered any inlier");

  std::vector<int> inliers = inliers_of(best_model, source, target, options.inlier_threshold);
  result.transform = best_model;
  result.inlier_indices = inliers;
  if (inliers.size() >= 3) {
    try {
      const RigidTransformd refit = fit_rigid(gather(source, inliers), gather(target, inliers));
      std::vector<int> refit_inliers = inliers_of(refit, source, target, options.inlier_threshold);
      if (refit_inliers.size() >= inliers.size()) {
        result.transform = refit;
        result.inlier_indices = std::move(refit_inliers);
      }
    } catch (const DegenerateConfigError&) {
      // Keep the minimal-sample model.
    }
  }
  return result;
}

RansacResult ransac_register(const PointCorrespondences& corr, const PointDescriptorCloud& source,
                             const PointDescriptorCloud& target, const RansacOptions& options) {
  Points3d p(3, static_cast<Eigen::Index>(corr.size()));
  Points3d q(3, static_cast<Eigen::Index>(corr.size()));
  for (std::size_t i = 0; i < corr.size(); ++i) {
    p.col(static_cast<Eigen::Index>(i)) = source.points.col(corr.pairs[i].source);
    q.col(static_cast<Eigen::Index>(i)) = target.points.col(corr.pairs[i].target);
  }
  return ransac_register(p, q, options);
}

}  // namespace zeroreg
