#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "zeroreg/error.hpp"
#include "zeroreg/object_matching.hpp"

namespace zeroreg {

struct PointDescriptorCloud;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Inner products of unit descriptor rows: G_p G_q^T.
template <typename DerivedP, typename DerivedQ>
MatrixX<typename DerivedP::Scalar> similarity_matrix(const Eigen::MatrixBase<DerivedP>& gp,
                                                     const Eigen::MatrixBase<DerivedQ>& gq) {
  if (gp.cols() != gq.cols()) throw ShapeError("similarity_matrix: descriptor dimensions differ");
  return gp * gq.transpose();
}

/// Appends one slack row and column filled with `z` (corner included).
template <typename Derived>
MatrixX<typename Derived::Scalar> augment_slack(const Eigen::MatrixBase<Derived>& scores,
                                                typename Derived::Scalar z = 1) {
  MatrixX<typename Derived::Scalar> out(scores.rows() + 1, scores.cols() + 1);
  out.topLeftCorner(scores.rows(), scores.cols()) = scores;
  out.rightCols(1).setConstant(z);
  out.bottomRows(1).setConstant(z);
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> strip_slack(const Eigen::MatrixBase<Derived>& augmented) {
  return augmented.topLeftCorner(augmented.rows() - 1, augmented.cols() - 1);
}

namespace detail {

template <typename Vec>
typename Vec::Scalar log_sum_exp(const Vec& v) {
  using Scalar = typename Vec::Scalar;
  const Scalar peak = v.maxCoeff();
  if (!std::isfinite(peak)) return peak;
  return peak + std::log((v.array() - peak).exp().sum());
}

}  // namespace detail

/// Log-domain Sinkhorn on slack-augmented scores. Entries are logits scaled by
/// 1 / temperature. Each iteration normalizes every non-slack row (over all
/// columns, slack included) and then every non-slack column (over all rows);
/// the slack row and column are never normalized themselves. Returns the
/// transport matrix (same shape as the input).
template <typename Derived>
MatrixX<typename Derived::Scalar> sinkhorn_normalize(const Eigen::MatrixBase<Derived>& augmented, int iterations = 20,
                                                     typename Derived::Scalar temperature = 0.1) {
  using Scalar = typename Derived::Scalar;
  if (iterations < 1) throw ShapeError("sinkhorn_normalize: iterations must be >= 1");
  if (!(temperature > Scalar(0))) throw ShapeError("sinkhorn_normalize: temperature must be > 0");
  if (augmented.rows() < 2 || augmented.cols() < 2) throw ShapeError("sinkhorn_normalize: expects a slack row and column");
  if (!augmented.allFinite()) throw NumericalError("sinkhorn_normalize: non-finite score");

  const Eigen::Index rows = augmented.rows() - 1;
  const Eigen::Index cols = augmented.cols() - 1;
  MatrixX<Scalar> log_p = augmented / temperature;
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index i = 0; i < rows; ++i) log_p.row(i).array() -= detail::log_sum_exp(log_p.row(i));
    for (Eigen::Index j = 0; j < cols; ++j) log_p.col(j).array() -= detail::log_sum_exp(log_p.col(j));
  }
  MatrixX<Scalar> transport = log_p.array().exp().matrix();
  if (!transport.allFinite()) throw NumericalError("sinkhorn_normalize: non-finite transport");
  return transport;
}

struct PointMatch {
  int source = 0;
  int target = 0;
  double confidence = 0.0;
  int region = -1;  // object pair index, -1 for the global fallback

  bool operator==(const PointMatch&) const = default;
};

struct PointCorrespondences {
  std::vector<PointMatch> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Drops the slack row/column and keeps mutual-argmax cells with mass >= gamma.
/// Indices are local to the transport matrix.
template <typename Derived>
PointCorrespondences extract_correspondences(const Eigen::MatrixBase<Derived>& transport, double gamma = 0.05) {
  PointCorrespondences out;
  const Eigen::Index rows = transport.rows() - 1;
  const Eigen::Index cols = transport.cols() - 1;
  if (rows <= 0 || cols <= 0) return out;
  const auto interior = transport.topLeftCorner(rows, cols);
  std::vector<Eigen::Index> col_best(cols);
  for (Eigen::Index j = 0; j < cols; ++j) interior.col(j).maxCoeff(&col_best[j]);
  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::Index j = 0;
    const double mass = interior.row(i).maxCoeff(&j);
    if (col_best[j] == i && mass >= gamma) {
      out.pairs.push_back({static_cast<int>(i), static_cast<int>(j), mass, -1});
    }
  }
  return out;
}

struct PointMatchingConfig {
  int sinkhorn_iterations = 20;
  double temperature = 0.1;
  double gamma = 0.05;
  double slack = 1.0;
  bool global_fallback = true;  // match all descriptors when no object pair is given
};

/// Similarity -> slack -> Sinkhorn -> extraction on one block of descriptors.
PointCorrespondences match_descriptor_block(const Eigen::MatrixXd& gp, const Eigen::MatrixXd& gq,
                                            const PointMatchingConfig& config);

/// Runs the chain independently per matched object pair (indices into the
/// clouds, region = pair index), or once over all descriptors when `regions`
/// is empty and the fallback is enabled.
PointCorrespondences match_points(const ObjectCorrespondences& regions, const PointDescriptorCloud& source,
                                  const PointDescriptorCloud& target, const PointMatchingConfig& config);

/// Same chain over every descriptor point.
PointCorrespondences match_points_global(const PointDescriptorCloud& source, const PointDescriptorCloud& target,
                                         const PointMatchingConfig& config);

}  // namespace zeroreg
