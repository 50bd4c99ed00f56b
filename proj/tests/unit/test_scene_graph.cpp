#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"
#include "zeroreg/projection.hpp"
#include "zeroreg/scene_graph.hpp"

namespace zeroreg {
namespace {

TEST(Centroid, Examples) {
  Points3d one(3, 1);
  one << 0, 0, 0;
  EXPECT_EQ(centroid(one), Eigen::Vector3d::Zero());

  Points3d two(3, 2);
  two << 0, 2, 0, 0, 0, 0;
  EXPECT_EQ(centroid(two), Eigen::Vector3d(1, 0, 0));

  EXPECT_THROW(centroid(Points3d(3, 0)), EmptyInputError);
}

TEST(Centroid, UnitCubeMatchesSummation) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Points3d pts(3, 100);
  for (int i = 0; i < 100; ++i) pts.col(i) << u(rng), u(rng), u(rng);
  double sx = 0, sy = 0, sz = 0;
  for (int i = 0; i < 100; ++i) {
    sx += pts(0, i);
    sy += pts(1, i);
    sz += pts(2, i);
  }
  EXPECT_LT((centroid(pts) - Eigen::Vector3d(sx / 100, sy / 100, sz / 100)).norm(), 1e-7);
}

TEST(BuildAffinity, TwoIdenticalNodes) {
  Points3d v(3, 2);
  v << 0, 1, 0, 0, 0, 0;
  Eigen::MatrixXd s(2, 2);
  s << 1, 0, 1, 0;
  Eigen::MatrixXd expected(2, 2);
  expected << 0, 2, 2, 0;
  EXPECT_EQ(build_affinity(v, s, 1), expected);
}

TEST(BuildAffinity, TwoOrthogonalNodes) {
  Points3d v(3, 2);
  v << 0, 1, 0, 0, 0, 0;
  Eigen::MatrixXd s(2, 2);
  s << 1, 0, 0, 1;
  const Eigen::MatrixXd w = build_affinity(v, s, 1);
  EXPECT_DOUBLE_EQ(w(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(w(1, 0), 1.0);
  EXPECT_EQ(w(0, 0), 0.0);
}

TEST(BuildAffinity, SingleNodeIsZero) {
  Points3d v(3, 1);
  v << 1, 2, 3;
  Eigen::MatrixXd s(1, 3);
  s << 1, 0, 0;
  const Eigen::MatrixXd w = build_affinity(v, s, 3);
  ASSERT_EQ(w.rows(), 1);
  EXPECT_EQ(w(0, 0), 0.0);
}

// exhaustive distance sort, lower index first on ties
std::vector<std::vector<bool>> knn_oracle(const Points3d& v, int k) {
  const int n = static_cast<int>(v.cols());
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (int j = 0; j < n; ++j) {
    std::vector<std::pair<double, int>> d;
    for (int i = 0; i < n; ++i)
      if (i != j) d.push_back({(v.col(i) - v.col(j)).norm(), i});
    std::sort(d.begin(), d.end());
    for (int r = 0; r < std::min<int>(k, d.size()); ++r) adj[j][d[r].second] = true;
  }
  return adj;
}

TEST(BuildAffinity, CollinearPatternMatchesKnnOracle) {
  Points3d v(3, 5);
  v << 0.0, 1.0, 1.5, 4.0, 4.2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd s = testing::random_unit_rows(5, 6, rng);
  const Eigen::MatrixXd w = build_affinity(v, s, 2);
  const auto adj = knn_oracle(v, 2);
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 5; ++i) {
      const bool edge = i != j && (adj[j][i] || adj[i][j]);
      EXPECT_EQ(w(j, i) != 0.0, edge) << j << "," << i;
      if (edge) EXPECT_NEAR(w(j, i), 1.0 + s.row(j).dot(s.row(i)), 1e-12);
    }
  }
}

TEST(BuildAffinity, TieGoesToLowerIndex) {
  Points3d v(3, 3);
  v << 0, -1, 1, 0, 0, 0, 0, 0, 0;
  EXPECT_EQ(nearest_neighbors(v, 0, 1), std::vector<int>{1});
}

TEST(BuildAffinity, InvariantsOnRandomGraphs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 40; ++t) {
    const int n = 2 + t % 9;
    const int k = 1 + t % 4;
    Points3d v(3, n);
    for (int i = 0; i < n; ++i) v.col(i) << u(rng), u(rng), u(rng);
    const Eigen::MatrixXd s = testing::random_unit_rows(n, 8, rng);
    const Eigen::MatrixXd w = build_affinity(v, s, k);
    EXPECT_EQ(w, w.transpose());
    EXPECT_EQ(w.diagonal().cwiseAbs().sum(), 0.0);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LE(w.maxCoeff(), 2.0);
    // each node selects min(k, n - 1) neighbours; symmetrization at most doubles the edge count
    const Eigen::MatrixXd directed = build_affinity(v, s, k, true);
    for (int j = 0; j < n; ++j) EXPECT_EQ((directed.row(j).array() != 0.0).count(), std::min(k, n - 1));
    EXPECT_LE((w.array() != 0.0).count(), 2 * std::min(k, n - 1) * n);

    // rigid transform of the centroids leaves W unchanged
    const RigidTransformd tr = testing::random_transform(rng);
    const Points3d moved = tr.apply(v);
    const auto adj = knn_oracle(v, k);
    const auto adj_moved = knn_oracle(moved, k);
    if (adj == adj_moved) EXPECT_EQ(build_affinity(moved, s, k), w);

    // positive scaling of semantics is invisible
    Eigen::MatrixXd scaled = s;
    for (int i = 0; i < n; ++i) scaled.row(i) *= 0.5 + i;
    EXPECT_LT((build_affinity(v, scaled, k) - w).cwiseAbs().maxCoeff(), 1e-12);

    const Eigen::MatrixXd d = build_affinity(v, s, k, true);
    EXPECT_LE((d.array() != 0.0).count(), (w.array() != 0.0).count());
  }
}

TEST(CrossSimilarity, Examples) {
  Eigen::MatrixXd a(1, 3), b(1, 3);
  a << 0.2, 0.4, 0.1;
  EXPECT_NEAR(cross_similarity(a, a)(0, 0), 2.0, 1e-12);
  b = -a;
  EXPECT_NEAR(cross_similarity(a, b)(0, 0), 0.0, 1e-12);
}

TEST(CrossSimilarity, RandomMatchesPairLoop) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Eigen::MatrixXd p(3, 4), q(2, 4);
  for (int i = 0; i < 12; ++i) p.data()[i] = n(rng);
  for (int i = 0; i < 8; ++i) q.data()[i] = n(rng);
  const Eigen::MatrixXd c = cross_similarity(p, q);
  ASSERT_EQ(c.rows(), 3);
  ASSERT_EQ(c.cols(), 2);
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 2; ++k) {
      double dot = 0, na = 0, nb = 0;
      for (int d = 0; d < 4; ++d) {
        dot += p(j, d) * q(k, d);
        na += p(j, d) * p(j, d);
        nb += q(k, d) * q(k, d);
      }
      EXPECT_NEAR(c(j, k), 1.0 + dot / std::sqrt(na * nb), 1e-7);
    }
  }
  EXPECT_LT((cross_similarity(q, p) - c.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CrossSimilarity, ZeroRowNamesNode) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Ones(3, 2);
  p.row(2).setZero();
  try {
    cross_similarity(Eigen::MatrixXd::Ones(1, 2), p);
    FAIL();
  } catch (const ZeroVectorError& e) {
    EXPECT_NE(std::string(e.what()).find("node 2"), std::string::npos);
  }
  EXPECT_THROW(cross_similarity(Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Ones(1, 3)), ShapeError);
}

TEST(BuildSceneGraph, NodesFromRegions) {
  MaskedPointCloud cloud;
  cloud.all_points.resize(3, 4);
  cloud.all_points << 0, 2, 10, 10, 0, 0, 0, 2, 0, 0, 0, 0;
  ObjectRegion a{{0, 1}, "chair", Eigen::Vector2d(1, 0), {}};
  ObjectRegion b{{2, 3}, "table", Eigen::Vector2d(0, 1), {}};
  cloud.objects = {a, b};
  const SceneGraphRep g = build_scene_graph(cloud, 3);
  ASSERT_EQ(g.size(), 2);
  EXPECT_EQ(g.centroids.col(0), Eigen::Vector3d(1, 0, 0));
  EXPECT_EQ(g.centroids.col(1), Eigen::Vector3d(10, 1, 0));
  EXPECT_EQ(g.k, 1);
  EXPECT_EQ(g.node_labels, (std::vector<std::string>{"chair", "table"}));
  EXPECT_DOUBLE_EQ(g.affinity(0, 1), 1.0);
}

}  // namespace
}  // namespace zeroreg
