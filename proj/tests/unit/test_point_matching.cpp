#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "test_util.hpp"
#include "zeroreg/point_matching.hpp"
#include "zeroreg/projection.hpp"

namespace zeroreg {
namespace {

// plain probability-domain Sinkhorn with the slack row/column exempt
Eigen::MatrixXd reference_sinkhorn(const Eigen::MatrixXd& logits, int iterations, double temperature) {
  Eigen::MatrixXd p = (logits / temperature).array().exp().matrix();
  const Eigen::Index rows = p.rows() - 1, cols = p.cols() - 1;
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index i = 0; i < rows; ++i) p.row(i) /= p.row(i).sum();
    for (Eigen::Index j = 0; j < cols; ++j) p.col(j) /= p.col(j).sum();
  }
  return p;
}

TEST(SimilarityMatrix, Examples) {
  Eigen::MatrixXd a(1, 3), b(1, 3);
  a << 0, 0.6, 0.8;
  b << 1, 0, 0;
  EXPECT_NEAR(similarity_matrix(a, a)(0, 0), 1.0, 1e-15);
  EXPECT_EQ(similarity_matrix(a, b)(0, 0), 0.0);
  EXPECT_THROW(similarity_matrix(a, Eigen::MatrixXd::Ones(1, 2)), ShapeError);
}

TEST(SimilarityMatrix, RandomMatchesDotLoop) {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd p = testing::random_unit_rows(4, 8, rng);
  const Eigen::MatrixXd q = testing::random_unit_rows(3, 8, rng);
  const Eigen::MatrixXd s = similarity_matrix(p, q);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int d = 0; d < 8; ++d) dot += p(i, d) * q(j, d);
      EXPECT_NEAR(s(i, j), dot, 1e-7);
    }
  }
}

TEST(AugmentSlack, Examples) {
  Eigen::MatrixXd s(1, 1);
  s << 0.5;
  Eigen::MatrixXd expected(2, 2);
  expected << 0.5, 1, 1, 1;
  EXPECT_EQ(augment_slack(s), expected);

  Eigen::MatrixXd r(2, 3);
  r << 1, 2, 3, 4, 5, 6;
  const Eigen::MatrixXd a = augment_slack(r);
  ASSERT_EQ(a.rows(), 3);
  ASSERT_EQ(a.cols(), 4);
  EXPECT_EQ(a.topLeftCorner(2, 3), r);
  EXPECT_TRUE((a.col(3).array() == 1.0).all());
  EXPECT_TRUE((a.row(2).array() == 1.0).all());
  EXPECT_EQ(strip_slack(a), r);
}

TEST(Sinkhorn, EqualLogitsReachSymmetricFixedPoint) {
  // all four logits equal to k: with row/column scale r, the interior cell is
  // r^2 k where r k (r + 1) = 1
  const double k = std::exp(1.0);
  const double r = (-k + std::sqrt(k * k + 4.0 * k)) / (2.0 * k);
  const Eigen::MatrixXd p = sinkhorn_normalize(augment_slack(Eigen::MatrixXd::Ones(1, 1)), 20, 1.0);
  EXPECT_NEAR(p(0, 0), r * r * k, 1e-6);
  EXPECT_NEAR(p(0, 1), p(1, 0), 1e-6);
  EXPECT_NEAR(p(0, 0) + p(0, 1), 1.0, 1e-6);
  EXPECT_NEAR(p(0, 0) + p(1, 0), 1.0, 1e-12);
}

TEST(Sinkhorn, StrongDiagonalConcentrates) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(4, 4, -10.0);
  s.diagonal().setConstant(10.0);
  const Eigen::MatrixXd p = sinkhorn_normalize(augment_slack(s), 20, 1.0);
  const Eigen::MatrixXd same = reference_sinkhorn(augment_slack(s), 20, 1.0);
  const Eigen::MatrixXd converged = reference_sinkhorn(augment_slack(s), 2000, 1.0);
  for (int i = 0; i < 4; ++i) {
    EXPECT_GT(p(i, i), 0.9);
    EXPECT_GT(converged(i, i), 0.9);
    EXPECT_NEAR(p(i, i), same(i, i), 1e-10);
  }
}

TEST(Sinkhorn, RowSumsOnCosineScores) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd s(8, 8);
  for (int i = 0; i < 64; ++i) s.data()[i] = u(rng);
  const Eigen::MatrixXd p = sinkhorn_normalize(augment_slack(s), 20, 1.0);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-6);
  for (int j = 0; j < 8; ++j) EXPECT_NEAR(p.col(j).sum(), 1.0, 1e-12);
  EXPECT_GT(p.minCoeff(), 0.0);
  EXPECT_LT(p.topLeftCorner(8, 8).maxCoeff(), 1.0);
}

TEST(Sinkhorn, MatchesProbabilityDomainReference) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd s(3 + t % 4, 2 + t % 5);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng);
    const Eigen::MatrixXd a = augment_slack(s);
    EXPECT_LT((sinkhorn_normalize(a, 20, 0.5) - reference_sinkhorn(a, 20, 0.5)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Sinkhorn, RejectsBadInput) {
  Eigen::MatrixXd a = augment_slack(Eigen::MatrixXd::Zero(2, 2));
  EXPECT_THROW(sinkhorn_normalize(a, 0, 1.0), ShapeError);
  EXPECT_THROW(sinkhorn_normalize(a, 20, 0.0), ShapeError);
  a(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(sinkhorn_normalize(a, 20, 1.0), NumericalError);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sinkhorn_normalize(a, 20, 1.0), NumericalError);
}

TEST(ExtractCorrespondences, Examples) {
  Eigen::MatrixXd p(4, 4);
  p << 0.8, 0.1, 0.05, 0.05, 0.1, 0.7, 0.1, 0.1, 0.05, 0.1, 0.6, 0.25, 0.05, 0.1, 0.25, 0.0;
  const PointCorrespondences c = extract_correspondences(p, 0.05);
  ASSERT_EQ(c.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(c.pairs[i].source, i);
    EXPECT_EQ(c.pairs[i].target, i);
    EXPECT_DOUBLE_EQ(c.pairs[i].confidence, p(i, i));
  }

  Eigen::MatrixXd slack_heavy(3, 3);
  slack_heavy << 0.2, 0.1, 0.7, 0.05, 0.3, 0.65, 0.1, 0.1, 0.0;
  const PointCorrespondences d = extract_correspondences(slack_heavy, 0.05);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.pairs[0].source, 0);
  EXPECT_EQ(d.pairs[0].target, 0);

  const Eigen::MatrixXd faint = Eigen::MatrixXd::Constant(4, 4, 0.04);
  EXPECT_TRUE(extract_correspondences(faint, 0.05).empty());
}

TEST(ExtractCorrespondences, MonotoneInGammaAndDuplicateFree) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd gp = testing::random_unit_rows(12, 6, rng);
    const Eigen::MatrixXd gq = testing::random_unit_rows(10, 6, rng);
    const Eigen::MatrixXd p = sinkhorn_normalize(augment_slack(similarity_matrix(gp, gq) / 0.1), 20, 1.0);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double gamma : {0.0, 0.01, 0.05, 0.2, 0.5, 0.9}) {
      const PointCorrespondences c = extract_correspondences(p, gamma);
      EXPECT_LE(c.size(), previous);
      previous = c.size();
      std::set<int> src, tgt;
      for (const auto& m : c.pairs) {
        EXPECT_TRUE(src.insert(m.source).second);
        EXPECT_TRUE(tgt.insert(m.target).second);
        EXPECT_GE(m.confidence, 0.0);
        EXPECT_LE(m.confidence, 1.0);
      }
    }
  }
}

TEST(MatchDescriptorBlock, PermutationEquivariance) {
  std::mt19937_64 rng(37);
  const Eigen::MatrixXd gp = testing::random_unit_rows(15, 16, rng);
  Eigen::MatrixXd gq = gp;
  std::normal_distribution<double> n(0.0, 0.02);
  for (Eigen::Index i = 0; i < gq.size(); ++i) gq.data()[i] += n(rng);
  for (Eigen::Index i = 0; i < gq.rows(); ++i) gq.row(i).normalize();
  std::vector<int> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd permuted(15, 16);
  for (int i = 0; i < 15; ++i) permuted.row(i) = gq.row(perm[i]);

  const PointMatchingConfig config;
  const PointCorrespondences a = match_descriptor_block(gp, gq, config);
  const PointCorrespondences b = match_descriptor_block(gp, permuted, config);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.size(), 15u);
  std::vector<int> inverse(15);
  for (int i = 0; i < 15; ++i) inverse[perm[i]] = i;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.pairs[k].source, b.pairs[k].source);
    EXPECT_EQ(inverse[a.pairs[k].target], b.pairs[k].target);
    EXPECT_NEAR(a.pairs[k].confidence, b.pairs[k].confidence, 1e-12);
  }
}

// Three regions per side; target region t holds the points of source region
// region_of[t] in shuffled order with identical descriptors.
struct PlantedClouds {
  PointDescriptorCloud source, target;
  std::vector<std::pair<int, int>> truth;  // (source index, target index)
};

PlantedClouds planted_clouds(std::mt19937_64& rng) {
  PlantedClouds out;
  const int per = 8;
  const Eigen::MatrixXd desc = testing::random_unit_rows(3 * per, 32, rng);
  out.source.points = Points3d::Zero(3, 3 * per);
  out.source.descriptors = desc;
  for (int r = 0; r < 3; ++r)
    for (int i = 0; i < per; ++i) out.source.object_index.push_back(r);

  const std::vector<int> region_of{2, 0, 1};
  out.target.points = Points3d::Zero(3, 3 * per);
  out.target.descriptors.resize(3 * per, 32);
  int next = 0;
  for (int t = 0; t < 3; ++t) {
    std::vector<int> order(per);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) {
      const int src = region_of[t] * per + i;
      out.target.descriptors.row(next) = desc.row(src);
      out.target.object_index.push_back(t);
      out.truth.push_back({src, next});
      ++next;
    }
  }
  std::sort(out.truth.begin(), out.truth.end());
  return out;
}

TEST(MatchPoints, PlantedRegionsRecoverIdentity) {
  std::mt19937_64 rng(43);
  const PlantedClouds c = planted_clouds(rng);
  ObjectCorrespondences regions;
  regions.pairs = {{0, 1}, {1, 2}, {2, 0}};
  const PointCorrespondences got = match_points(regions, c.source, c.target, PointMatchingConfig{});
  std::vector<std::pair<int, int>> pairs;
  for (const auto& m : got.pairs) {
    pairs.push_back({m.source, m.target});
    EXPECT_EQ(c.source.object_index[m.source], regions.pairs[m.region].first);
    EXPECT_EQ(c.target.object_index[m.target], regions.pairs[m.region].second);
  }
  std::sort(pairs.begin(), pairs.end());
  EXPECT_EQ(pairs, c.truth);
}

TEST(MatchPoints, EmptyRegionsFallBackToGlobal) {
  std::mt19937_64 rng(47);
  const PlantedClouds c = planted_clouds(rng);
  const PointMatchingConfig config;
  const PointCorrespondences a = match_points(ObjectCorrespondences{}, c.source, c.target, config);
  const PointCorrespondences b = match_points_global(c.source, c.target, config);
  EXPECT_EQ(a.pairs, b.pairs);
  for (const auto& m : a.pairs) EXPECT_EQ(m.region, -1);

  PointMatchingConfig no_fallback;
  no_fallback.global_fallback = false;
  EXPECT_THROW(match_points(ObjectCorrespondences{}, c.source, c.target, no_fallback), EmptyInputError);
}

TEST(MatchPoints, WrongRegionPairingNeverCrossesBoundaries) {
  std::mt19937_64 rng(53);
  const PlantedClouds c = planted_clouds(rng);
  ObjectCorrespondences regions;
  regions.pairs = {{0, 0}, {1, 1}};
  for (const auto& m : match_points(regions, c.source, c.target, PointMatchingConfig{}).pairs) {
    EXPECT_EQ(c.source.object_index[m.source], regions.pairs[m.region].first);
    EXPECT_EQ(c.target.object_index[m.target], regions.pairs[m.region].second);
  }
}

TEST(MatchPoints, EmptyCloudThrows) {
  PointDescriptorCloud empty;
  std::mt19937_64 rng(1);
  const PlantedClouds c = planted_clouds(rng);
  EXPECT_THROW(match_points(ObjectCorrespondences{}, empty, c.target, PointMatchingConfig{}), EmptyInputError);
}

}  // namespace
}  // namespace zeroreg
