#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "zeroreg/error.hpp"
#include "zeroreg/geometry.hpp"

namespace zeroreg {

struct MaskedPointCloud;

/// Arithmetic mean of a 3 x N point set.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> centroid(const Eigen::MatrixBase<Derived>& points) {
  static_assert(Derived::RowsAtCompileTime == 3 || Derived::RowsAtCompileTime == Eigen::Dynamic);
  if (points.cols() == 0) throw EmptyInputError("centroid: empty point set");
  return points.rowwise().mean();
}

/// Rows scaled to unit length; `what` names the side in the error message.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> normalized_rows(
    const Eigen::MatrixBase<Derived>& m, const char* what) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Scalar norm = m.row(i).norm();
    if (!(norm > Scalar(0))) {
      throw ZeroVectorError(std::string(what) + " node " + std::to_string(i) + " has a zero semantic vector");
    }
    out.row(i) = m.row(i) / norm;
  }
  return out;
}

/// 1 + cos(s_j, s_k) for every cross pair; n x m, entries in [0, 2].
template <typename DerivedP, typename DerivedQ>
Eigen::Matrix<typename DerivedP::Scalar, Eigen::Dynamic, Eigen::Dynamic> cross_similarity(
    const Eigen::MatrixBase<DerivedP>& semantics_p, const Eigen::MatrixBase<DerivedQ>& semantics_q) {
  if (semantics_p.cols() != semantics_q.cols()) throw ShapeError("cross_similarity: feature dimensions differ");
  const auto p = normalized_rows(semantics_p, "source");
  const auto q = normalized_rows(semantics_q, "target");
  using Scalar = typename DerivedP::Scalar;
  return ((p * q.transpose()).array() + Scalar(1)).cwiseMax(Scalar(0)).cwiseMin(Scalar(2)).matrix();
}

/// Indices of the k nearest other nodes of `j` (Euclidean, ties to the lower index).
template <typename Derived>
std::vector<int> nearest_neighbors(const Eigen::MatrixBase<Derived>& centroids, int j, int k) {
  const int n = static_cast<int>(centroids.cols());
  std::vector<int> others;
  others.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (i != j) others.push_back(i);
  }
  std::vector<typename Derived::Scalar> dist(n);
  for (int i : others) dist[i] = (centroids.col(i) - centroids.col(j)).squaredNorm();
  k = std::min<int>(k, static_cast<int>(others.size()));
  std::partial_sort(others.begin(), others.begin() + k, others.end(),
                    [&](int a, int b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  others.resize(k);
  return others;
}

/// Semantic kNN affinity: W_jk = 1 + cos(s_j, s_k) when k is among the k nearest
/// centroids of j. Symmetrized by elementwise max unless `directed`; zero diagonal.
/// `centroids` is 3 x n, `semantics` n x d.
template <typename DerivedV, typename DerivedS>
Eigen::Matrix<typename DerivedS::Scalar, Eigen::Dynamic, Eigen::Dynamic> build_affinity(
    const Eigen::MatrixBase<DerivedV>& centroids, const Eigen::MatrixBase<DerivedS>& semantics, int k,
    bool directed = false) {
  using Scalar = typename DerivedS::Scalar;
  const Eigen::Index n = centroids.cols();
  if (semantics.rows() != n) throw ShapeError("build_affinity: one semantic row per node required");
  if (k < 1) throw ShapeError("build_affinity: k must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> w =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  if (n <= 1) return w;
  const auto s = normalized_rows(semantics, "graph");
  for (int j = 0; j < n; ++j) {
    for (int i : nearest_neighbors(centroids, j, k)) {
      w(j, i) = std::clamp(Scalar(1) + s.row(j).dot(s.row(i)), Scalar(0), Scalar(2));
    }
  }
  if (!directed) w = w.cwiseMax(w.transpose()).eval();
  w.diagonal().setZero();
  return w;
}

struct SceneGraphRep {
  Points3d centroids;            // 3 x n
  Eigen::MatrixXd affinity;      // n x n
  Eigen::MatrixXd node_semantics;  // n x d
  std::vector<std::string> node_labels;
  int k = 3;

  Eigen::Index size() const { return centroids.cols(); }
};

/// One node per object region: centroid of its points, its unified semantic
/// vector and label. k is clamped to n - 1.
SceneGraphRep build_scene_graph(const MaskedPointCloud& cloud, int k, bool directed = false);

}  // namespace zeroreg
