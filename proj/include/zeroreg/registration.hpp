#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "zeroreg/error.hpp"
#include "zeroreg/geometry.hpp"

namespace zeroreg {

struct PointCorrespondences;
struct PointDescriptorCloud;

/// Least-squares rigid transform mapping source columns onto target columns
/// (Kabsch with reflection correction). Both inputs are 3 x N, N >= 3, and the
/// source points must not be collinear.
template <typename DerivedP, typename DerivedQ>
RigidTransform<typename DerivedP::Scalar> fit_rigid(const Eigen::MatrixBase<DerivedP>& source,
                                                    const Eigen::MatrixBase<DerivedQ>& target) {
  using Scalar = typename DerivedP::Scalar;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  if (source.cols() != target.cols()) throw ShapeError("fit_rigid: source and target counts differ");
  if (source.cols() < 3) throw InsufficientDataError("fit_rigid: need at least 3 pairs");

  const Vector3 mean_p = source.rowwise().mean();
  const Vector3 mean_q = target.rowwise().mean();
  const auto centered_p = (source.colwise() - mean_p).eval();
  const auto centered_q = (target.colwise() - mean_q).eval();

  // Collinear (or coincident) sources leave the rotation about the line undetermined.
  const Matrix3 scatter = centered_p * centered_p.transpose();
  const Eigen::SelfAdjointEigenSolver<Matrix3> eig(scatter, Eigen::EigenvaluesOnly);
  const Vector3 lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > Scalar(0)) || lambda(1) <= Scalar(1e-12) * lambda(2)) {
    throw DegenerateConfigError("fit_rigid: source points are collinear");
  }

  const Matrix3 cross = centered_p * centered_q.transpose();
  const Eigen::JacobiSVD<Matrix3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix3& u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  Matrix3 d = Matrix3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < Scalar(0) ? Scalar(-1) : Scalar(1);

  const Matrix3 rotation = v * d * u.transpose();
  return RigidTransform<Scalar>::FromParts(rotation, mean_q - rotation * mean_p);
}

struct RansacOptions {
  int max_iterations = 50000;
  double inlier_threshold = 0.05;  // meters
  double confidence = 0.999;       // early-exit probability
  std::uint64_t seed = 0;
};

struct RansacResult {
  RigidTransformd transform;
  std::vector<int> inlier_indices;
  int iterations_run = 0;
};

/// Hypothesize-and-verify over 3-point samples. Iteration i draws from its own
/// counter-based stream, so results depend only on (seed, inputs). The winner
/// is the hypothesis with the most inliers (earliest iteration on ties), refit
/// on its inlier set.
RansacResult ransac_register(const Points3d& source, const Points3d& target, const RansacOptions& options);

/// Convenience overload resolving correspondence indices through the clouds.
RansacResult ransac_register(const PointCorrespondences& corr, const PointDescriptorCloud& source,
                             const PointDescriptorCloud& target, const RansacOptions& options);

/// Iterations needed so that an all-inlier sample is drawn with `confidence`.
int ransac_required_iterations(double inlier_ratio, double confidence, int sample_size = 3);

}  // namespace zeroreg
