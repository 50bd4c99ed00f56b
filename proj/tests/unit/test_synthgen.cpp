#include <gtest/gtest.h>

#include <map>
#include <set>

#include "test_util.hpp"
#include "zeroreg/pipeline.hpp"
#include "zeroreg/projection.hpp"
#include "zeroreg/synthgen.hpp"

namespace zeroreg {
namespace {

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec s;
  s.object_count = 4;
  s.seed = seed;
  return s;
}

TEST(GeneratePair, SameSeedGivesIdenticalBytes) {
  testing::TempDir a, b;
  SceneSpec spec = small_spec(42);
  spec.duplicates_per_category = 2;
  spec.outlier_mask_count = 1;
  write_pair(generate_pair(spec), a.path());
  write_pair(generate_pair(spec), b.path());
  const auto ha = testing::tree_hash(a.path());
  EXPECT_EQ(ha, testing::tree_hash(b.path()));
  EXPECT_TRUE(ha.count("gt.json"));
  EXPECT_TRUE(ha.count("source/manifest.json"));

  spec.seed = 43;
  testing::TempDir c;
  write_pair(generate_pair(spec), c.path());
  EXPECT_NE(ha, testing::tree_hash(c.path()));
}

TEST(GeneratePair, DuplicatesShareOnePrototype) {
  SceneSpec spec = small_spec(3);
  spec.object_count = 5;
  spec.duplicates_per_category = 3;
  spec.semantic_noise_sigma = 0.05;
  const GeneratedPair pair = generate_pair(spec);

  std::map<std::string, std::set<int>> objects_by_label;
  for (std::size_t i = 0; i < pair.truth.source_object_labels.size(); ++i)
    objects_by_label[pair.truth.source_object_labels[i]].insert(static_cast<int>(i));
  std::string dup_label;
  for (const auto& [label, ids] : objects_by_label)
    if (ids.size() == 3) dup_label = label;
  ASSERT_FALSE(dup_label.empty());

  std::vector<Eigen::VectorXd> features;
  std::set<int> owners;
  for (const auto& f : pair.source.semantic_features) {
    const ObjectMask* m = pair.source.mask(f.mask_ref);
    if (m->category_label != dup_label) continue;
    features.push_back(f.vector.cast<double>());
    owners.insert(pair.truth.source_object_of(f.mask_ref));
  }
  EXPECT_EQ(owners.size(), 3u);
  for (std::size_t i = 0; i < features.size(); ++i)
    for (std::size_t j = i + 1; j < features.size(); ++j)
      EXPECT_GE(features[i].dot(features[j]) / (features[i].norm() * features[j].norm()), 0.9);
}

TEST(GeneratePair, ZeroNoiseRegistersExactly) {
  SceneSpec spec = small_spec(7);
  spec.overlap_ratio = 1.0;
  spec.semantic_noise_sigma = 0.0;
  spec.descriptor_noise_sigma = 0.0;
  spec.depth_noise_sigma = 0.0;
  spec.depth_quantization = 0.0;
  const GeneratedPair pair = generate_pair(spec);
  const RegistrationReport report = register_pair(pair.source, pair.target, PipelineConfig{});
  EXPECT_LT(rmse(report.transform, pair.truth.transform, pair.truth.overlap_points), 1e-3);
}

TEST(GeneratePair, GroundTruthIsConsistent) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SceneSpec spec = small_spec(seed);
    spec.overlap_ratio = 0.6;
    spec.object_count = 6;
    const GeneratedPair pair = generate_pair(spec);
    const GroundTruth& gt = pair.truth;
    EXPECT_TRUE(gt.transform.isValid());
    ASSERT_FALSE(gt.point_pairs.empty());
    const double bound = 3.0 * spec.depth_noise_sigma + spec.depth_quantization;
    for (auto [s, t] : gt.point_pairs) {
      EXPECT_LE((gt.transform(gt.source_keypoints.col(s)) - gt.target_keypoints.col(t)).norm(), bound);
    }
    for (auto [s, t] : gt.object_pairs) EXPECT_EQ(gt.source_object_labels[s], gt.target_object_labels[t]);
    EXPECT_LT(gt.object_pairs.size(), 6u);
    EXPECT_GT(gt.overlap_points.cols(), 0);
    EXPECT_NO_THROW(validate_bundle(pair.source));
    EXPECT_NO_THROW(validate_bundle(pair.target));
  }
}

TEST(GeneratePair, SemanticNoiseLeavesGeometryUntouched) {
  SceneSpec a = small_spec(11);
  SceneSpec b = a;
  b.semantic_noise_sigma = 0.3;
  const GeneratedPair pa = generate_pair(a), pb = generate_pair(b);
  for (auto [x, y] : {std::pair{&pa.source, &pb.source}, std::pair{&pa.target, &pb.target}}) {
    ASSERT_EQ(x->frames.size(), y->frames.size());
    for (std::size_t i = 0; i < x->frames.size(); ++i) EXPECT_TRUE(x->frames[i] == y->frames[i]);
    ASSERT_EQ(x->masks.size(), y->masks.size());
    for (std::size_t i = 0; i < x->masks.size(); ++i) EXPECT_TRUE(x->masks[i] == y->masks[i]);
    ASSERT_EQ(x->geometric.size(), y->geometric.size());
    for (std::size_t i = 0; i < x->geometric.size(); ++i) EXPECT_TRUE(x->geometric[i] == y->geometric[i]);
    bool any_diff = false;
    for (std::size_t i = 0; i < x->semantic_features.size(); ++i)
      any_diff |= !(x->semantic_features[i] == y->semantic_features[i]);
    EXPECT_TRUE(any_diff);
  }
  EXPECT_EQ(pa.truth.transform.rotation, pb.truth.transform.rotation);
  EXPECT_EQ(pa.truth.point_pairs, pb.truth.point_pairs);
}

TEST(GeneratePair, InvalidSpecsThrow) {
  SceneSpec s = small_spec(1);
  s.object_count = 0;
  EXPECT_THROW(generate_pair(s), GenerationError);
  s = small_spec(1);
  s.view_count = 0;
  EXPECT_THROW(generate_pair(s), GenerationError);
  s = small_spec(1);
  s.depth_noise_sigma = -0.1;
  EXPECT_THROW(generate_pair(s), GenerationError);
  s = small_spec(1);
  s.overlap_ratio = 0.0;
  EXPECT_THROW(generate_pair(s), GenerationError);
}

TEST(GeneratePair, CategoryPrototypesAreUnitAndFixed) {
  EXPECT_EQ(category_vocabulary().size(), 12u);
  EXPECT_EQ(category_vocabulary().front(), "chair");
  const Eigen::VectorXd a = category_prototype(0, 64);
  EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  EXPECT_EQ(a, category_prototype(0, 64));
  EXPECT_LT(std::abs(a.dot(category_prototype(1, 64))), 0.6);
}

CameraIntrinsics vga() { return {100.0, 100.0, 320.0, 240.0, 640, 480}; }

TEST(RenderDepth, PointOnOpticalAxis) {
  Points3d p(3, 1);
  p << 0, 0, 2;
  const DepthFrame f = render_depth(p, vga(), CameraPose::Identity());
  EXPECT_EQ(f.depth(240, 320), 2.0f);
  EXPECT_EQ((f.depth.array() > 0).count(), 1);
}

TEST(RenderDepth, NearerPointWins) {
  Points3d p(3, 2);
  p << 0.3, 0.15, 0.1, 0.05, 3.0, 1.5;
  const RenderResult r = render_depth_indexed(p, vga(), CameraPose::Identity());
  const Eigen::Vector3d uvz = project_point(r.frame, p.col(1));
  const int u = static_cast<int>(std::lround(uvz.x())), v = static_cast<int>(std::lround(uvz.y()));
  EXPECT_EQ(r.winner(v, u), 1);
  EXPECT_NEAR(r.frame.depth(v, u), 1.5, 1e-6);
}

TEST(RenderDepth, NothingVisibleThrows) {
  Points3d p(3, 1);
  p << 0, 0, -2;
  EXPECT_THROW(render_depth(p, vga(), CameraPose::Identity()), EmptyRenderError);
}

TEST(RenderDepth, BackProjectionWithinHalfPixel) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> xy(-1.0, 1.0), z(1.0, 4.0);
  Points3d p(3, 400);
  for (int i = 0; i < 400; ++i) p.col(i) << xy(rng), xy(rng), z(rng);
  const CameraPose pose = testing::random_transform(rng);
  const Points3d world = pose.apply(p);
  const RenderResult r = render_depth_indexed(world, vga(), pose);
  int checked = 0;
  for (Eigen::Index v = 0; v < r.winner.rows(); ++v) {
    for (Eigen::Index u = 0; u < r.winner.cols(); ++u) {
      const int w = r.winner(v, u);
      if (w < 0) continue;
      const Eigen::Vector3d back = back_project_pixel(r.frame, static_cast<double>(u), static_cast<double>(v), r.frame.depth(v, u));
      const double depth = p(2, w);
      EXPECT_LE((back - world.col(w)).norm(), depth * std::sqrt(0.5) / 100.0 + 1e-5);
      ++checked;
    }
  }
  EXPECT_GT(checked, 300);
}

TEST(LookAt, AxesPointAtTarget) {
  const Eigen::Vector3d eye(3, 1, 2), target(0, 0, 0);
  const CameraPose pose = look_at(eye, target, Eigen::Vector3d::UnitZ());
  EXPECT_TRUE(pose.isValid());
  EXPECT_LT((pose.translation - eye).norm(), 1e-12);
  EXPECT_LT((pose.rotation.col(2) - (target - eye).normalized()).norm(), 1e-12);
  EXPECT_LT(pose.rotation.col(1).dot(Eigen::Vector3d::UnitZ()), 0.0);
}

TEST(GroundTruthJson, RoundTrip) {
  const GeneratedPair pair = generate_pair(small_spec(9));
  const GroundTruth back = ground_truth_from_json(ground_truth_to_json(pair.truth));
  EXPECT_EQ(back.transform.rotation, pair.truth.transform.rotation);
  EXPECT_EQ(back.transform.translation, pair.truth.transform.translation);
  EXPECT_EQ(back.object_pairs, pair.truth.object_pairs);
  EXPECT_EQ(back.point_pairs, pair.truth.point_pairs);
  EXPECT_EQ(back.source_keypoints, pair.truth.source_keypoints);
  EXPECT_EQ(back.overlap_points, pair.truth.overlap_points);
  EXPECT_EQ(back.source_mask_objects, pair.truth.source_mask_objects);
  EXPECT_EQ(back.target_object_labels, pair.truth.target_object_labels);

  testing::TempDir dir;
  write_pair(pair, dir.path());
  const GeneratedPair read = read_pair(dir.path());
  EXPECT_TRUE(read.source == pair.source);
  EXPECT_TRUE(read.target == pair.target);
  EXPECT_EQ(read.truth.point_pairs, pair.truth.point_pairs);
}

TEST(SuiteSpec, SamplingIsDeterministicAndInRange) {
  const SuiteSpec suite = default_suite_spec();
  std::set<std::uint64_t> seeds;
  for (int i = 0; i < 50; ++i) {
    const SceneSpec a = sample_scene_spec(suite, i);
    const SceneSpec b = sample_scene_spec(suite, i);
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.object_count, b.object_count);
    EXPECT_GE(a.object_count, 3);
    EXPECT_LE(a.object_count, 8);
    EXPECT_GE(a.duplicates_per_category, 1);
    EXPECT_LE(a.duplicates_per_category, 3);
    EXPECT_GE(a.overlap_ratio, 0.4);
    EXPECT_LE(a.overlap_ratio, 1.0);
    EXPECT_EQ(a.depth_noise_sigma, 0.005);
    seeds.insert(a.seed);
  }
  EXPECT_EQ(seeds.size(), 50u);
}

TEST(SuiteSpec, ParsesRangesAndRejectsUnknownKeys) {
  const SuiteSpec s = parse_suite_spec(R"({"object_count": [4, 6], "duplicates_per_category": 2,
                                           "overlap_ratio": [0.5, 0.9], "view_count": 2, "seed": 17})");
  EXPECT_EQ(s.object_count_min, 4);
  EXPECT_EQ(s.object_count_max, 6);
  EXPECT_EQ(s.duplicates_min, 2);
  EXPECT_EQ(s.duplicates_max, 2);
  EXPECT_EQ(s.overlap_min, 0.5);
  EXPECT_EQ(s.base.view_count, 2);
  EXPECT_EQ(s.base.seed, 17u);
  EXPECT_THROW(parse_suite_spec(R"({"objects": 3})"), ValidationError);
  EXPECT_THROW(parse_suite_spec("{"), InputError);
}

}  // namespace
}  // namespace zeroreg
