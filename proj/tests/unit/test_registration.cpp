#include <gtest/gtest.h>

#include "test_util.hpp"
#include "zeroreg/metrics.hpp"
#include "zeroreg/point_matching.hpp"
#include "zeroreg/projection.hpp"
#include "zeroreg/registration.hpp"

namespace zeroreg {
namespace {

Points3d random_points(int n, std::mt19937_64& rng, double extent = 1.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  Points3d p(3, n);
  for (int i = 0; i < n; ++i) p.col(i) << u(rng), u(rng), u(rng);
  return p;
}

TEST(FitRigid, IdenticalPointsGiveIdentity) {
  std::mt19937_64 rng(1);
  const Points3d p = random_points(5, rng);
  const RigidTransformd t = fit_rigid(p, p);
  EXPECT_LT((t.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_LT(t.translation.norm(), 1e-12);
}

TEST(FitRigid, RecoversPlantedRotationAboutZ) {
  Points3d p(3, 4);
  p << 0, 1, 0, 0.3, 0, 0, 1, 0.5, 0, 0, 0, 1;
  const Eigen::Matrix3d rz = rotation_about_axis<double>(Eigen::Vector3d::UnitZ(), kPi / 2);
  const Points3d q = (rz * p).colwise() + Eigen::Vector3d(1, 2, 3);
  const RigidTransformd t = fit_rigid(p, q);
  EXPECT_LT((t.rotation - rz).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((t.translation - Eigen::Vector3d(1, 2, 3)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FitRigid, MirroredInputStillProper) {
  std::mt19937_64 rng(2);
  const Points3d p = random_points(10, rng);
  const RigidTransformd t = fit_rigid(p, (-p).eval());
  EXPECT_NEAR(t.rotation.determinant(), 1.0, 1e-9);
  EXPECT_TRUE(t.isValid());
}

TEST(FitRigid, Errors) {
  Points3d two(3, 2);
  two.setRandom();
  EXPECT_THROW(fit_rigid(two, two), InsufficientDataError);
  Points3d line(3, 5);
  for (int i = 0; i < 5; ++i) line.col(i) = Eigen::Vector3d(1, 2, 3) * i;
  EXPECT_THROW(fit_rigid(line, line), DegenerateConfigError);
  Points3d three(3, 3);
  three.setRandom();
  EXPECT_THROW(fit_rigid(three, two), ShapeError);
}

TEST(FitRigid, LocallyOptimalAgainstPerturbations) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  const Points3d p = random_points(30, rng);
  const RigidTransformd truth = testing::random_transform(rng);
  Points3d q = truth.apply(p);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] += noise(rng);
  const RigidTransformd t = fit_rigid(p, q);
  const double best = (t.apply(p) - q).squaredNorm();
  for (int k = 0; k < 200; ++k) {
    const Eigen::Matrix3d dr = rotation_about_axis<double>(testing::random_unit3(rng), 1e-3 * (1 + k % 5));
    const Eigen::Vector3d dt = testing::random_unit3(rng) * 1e-3 * (1 + k % 3);
    const RigidTransformd alt = RigidTransformd::FromParts(dr * t.rotation, t.translation + dt);
    EXPECT_LE(best, (alt.apply(p) - q).squaredNorm());
  }
}

TEST(FitRigid, TranslationEquivariance) {
  std::mt19937_64 rng(4);
  const Points3d p = random_points(8, rng);
  const RigidTransformd truth = testing::random_transform(rng);
  const Points3d q = truth.apply(p);
  const Eigen::Vector3d shift(3, -1, 0.5);
  const RigidTransformd a = fit_rigid(p, q);
  const RigidTransformd b = fit_rigid((p.colwise() + shift).eval(), (q.colwise() + shift).eval());
  EXPECT_LT((a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((b.translation - (a.translation + shift - a.rotation * shift)).norm(), 1e-9);
}

TEST(Ransac, NoiseFreeInliers) {
  std::mt19937_64 rng(5);
  const Points3d p = random_points(100, rng);
  const RigidTransformd truth = testing::random_transform(rng);
  const RansacResult r = ransac_register(p, truth.apply(p), RansacOptions{});
  EXPECT_EQ(r.inlier_indices.size(), 100u);
  const auto [re, te] = rotation_translation_error(r.transform, truth);
  EXPECT_LT((r.transform.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(te, 1e-6);
  (void)re;
}

TEST(Ransac, HalfOutliers) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.005);
  const Points3d p = random_points(100, rng, 2.0);
  const RigidTransformd truth = testing::random_transform(rng);
  Points3d q = truth.apply(p);
  for (int i = 0; i < 50; ++i)
    for (int d = 0; d < 3; ++d) q(d, i) += noise(rng);
  q.rightCols(50) = random_points(50, rng, 3.0);
  RansacOptions options;
  options.seed = 1;
  const RansacResult r = ransac_register(p, q, options);
  const auto [re, te] = rotation_translation_error(r.transform, truth);
  EXPECT_LT(re, 1.0);
  EXPECT_LT(te, 0.02);
  for (int i : r.inlier_indices) EXPECT_LE((r.transform(p.col(i)) - q.col(i)).norm(), options.inlier_threshold);
}

TEST(Ransac, ThreeExactPairsEqualFitRigid) {
  std::mt19937_64 rng(6);
  const Points3d p = random_points(3, rng);
  const RigidTransformd truth = testing::random_transform(rng);
  const Points3d q = truth.apply(p);
  const RansacResult r = ransac_register(p, q, RansacOptions{});
  const RigidTransformd f = fit_rigid(p, q);
  EXPECT_LT((r.transform.rotation - f.rotation).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((r.transform.translation - f.translation).norm(), 1e-9);
  EXPECT_EQ(r.inlier_indices.size(), 3u);
}

TEST(Ransac, ReproducibleForSeed) {
  std::mt19937_64 rng(7);
  const Points3d p = random_points(60, rng);
  Points3d q = testing::random_transform(rng).apply(p);
  q.rightCols(30) = random_points(30, rng, 3.0);
  RansacOptions options;
  options.seed = 99;
  const RansacResult a = ransac_register(p, q, options);
  const RansacResult b = ransac_register(p, q, options);
  EXPECT_EQ(a.transform.rotation, b.transform.rotation);
  EXPECT_EQ(a.transform.translation, b.transform.translation);
  EXPECT_EQ(a.inlier_indices, b.inlier_indices);
  EXPECT_EQ(a.iterations_run, b.iterations_run);
}

TEST(Ransac, Errors) {
  Points3d two = Points3d::Random(3, 2);
  EXPECT_THROW(ransac_register(two, two, RansacOptions{}), InsufficientDataError);
}

TEST(Ransac, CorrespondenceOverloadResolvesIndices) {
  std::mt19937_64 rng(8);
  PointDescriptorCloud src, tgt;
  src.points = random_points(10, rng);
  const RigidTransformd truth = testing::random_transform(rng);
  tgt.points = truth.apply(src.points).rowwise().reverse();
  PointCorrespondences corr;
  for (int i = 0; i < 10; ++i) corr.pairs.push_back({i, 9 - i, 1.0, -1});
  const RansacResult r = ransac_register(corr, src, tgt, RansacOptions{});
  EXPECT_LT((r.transform.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ransac, RequiredIterations) {
  EXPECT_EQ(ransac_required_iterations(1.0, 0.999), 1);
  const int n = ransac_required_iterations(0.5, 0.999);
  EXPECT_NEAR(n, std::ceil(std::log(0.001) / std::log(1 - 0.125)), 1);
}

TEST(ApplyTransform, Examples) {
  std::mt19937_64 rng(9);
  const Points3d p = random_points(20, rng);
  EXPECT_EQ(apply_transform(RigidTransformd::Identity(), p), p);
  Points3d origin = Points3d::Zero(3, 1);
  const RigidTransformd shift = RigidTransformd::FromParts(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 1));
  EXPECT_EQ(apply_transform(shift, origin).col(0), Eigen::Vector3d(0, 0, 1));
  const RigidTransformd t = testing::random_transform(rng);
  EXPECT_LT((apply_transform(t * t.inverse(), p) - p).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((apply_transform(t, apply_transform(t.inverse(), p)) - p).cwiseAbs().maxCoeff(), 1e-9);
}

}  // namespace
}  // namespace zeroreg
