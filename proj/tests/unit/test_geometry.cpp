#include <gtest/gtest.h>

#include <numeric>

#include "test_util.hpp"
#include "zeroreg/assignment.hpp"
#include "zeroreg/rng.hpp"
#include "zeroreg/voxel_hash.hpp"

namespace zeroreg {
namespace {

TEST(RigidTransform, ComposeAndInverse) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const RigidTransformd a = testing::random_transform(rng);
    const RigidTransformd b = testing::random_transform(rng);
    const Eigen::Vector3d p(0.3, -1.2, 2.0);
    EXPECT_LT(((a * b)(p) - a(b(p))).norm(), 1e-12);
    EXPECT_LT(((a.inverse() * a)(p) - p).norm(), 1e-12);
    EXPECT_TRUE((a * b).isValid());
  }
}

TEST(RigidTransform, RowMajorRoundTrip) {
  std::mt19937_64 rng(3);
  const RigidTransformd t = testing::random_transform(rng);
  const RigidTransformd back = RigidTransformd::FromRowMajor12(t.toRowMajor12());
  EXPECT_EQ(back.rotation, t.rotation);
  EXPECT_EQ(back.translation, t.translation);
}

TEST(RigidTransform, RejectsReflection) {
  RigidTransformd t;
  t.rotation(2, 2) = -1.0;
  EXPECT_FALSE(t.isValid());
}

TEST(CounterRng, StreamsAreReproducibleAndDistinct) {
  CounterRng a(7, 1), b(7, 1), c(7, 2);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
  CounterRng d(7, 1);
  d();
  const CounterRng child = d.derive(5);
  CounterRng e(7, 1);
  e();
  EXPECT_EQ(e(), d());
  (void)child;
}

TEST(CounterRng, UniformInUnitInterval) {
  CounterRng r(1);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 10000.0, 0.5, 0.02);
}

TEST(VoxelHash, NearestMatchesBruteForce) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::Vector3d> pts;
  VoxelHash hash(0.2);
  for (int i = 0; i < 300; ++i) {
    pts.emplace_back(u(rng), u(rng), u(rng));
    hash.insert(i, pts.back());
  }
  for (int q = 0; q < 200; ++q) {
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    int best = -1;
    double best_d = 0.2;
    for (int i = 0; i < 300; ++i) {
      const double d = (pts[i] - p).norm();
      if (d <= best_d && (best < 0 || d < best_d)) {
        best = i;
        best_d = d;
      }
    }
    EXPECT_EQ(hash.nearest(p), best);
  }
}

TEST(LinearAssignment, MatchesEnumeration) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 4;
    const int m = 1 + (trial / 4) % 5;
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost(i, j) = u(rng);
    const std::vector<int> a = solve_linear_assignment(cost);
    double got = 0.0;
    for (int i = 0; i < n; ++i)
      if (a[i] >= 0) got += cost(i, a[i]);

    // brute force over injections of the smaller side
    const bool rows_small = n <= m;
    const int small = std::min(n, m), large = std::max(n, m);
    std::vector<int> perm(large);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (int i = 0; i < small; ++i) s += rows_small ? cost(i, perm[i]) : cost(perm[i], i);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(got, best, 1e-12);
  }
}

}  // namespace
}  // namespace zeroreg
