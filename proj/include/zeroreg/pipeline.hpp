#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "zeroreg/geometry.hpp"
#include "zeroreg/metrics.hpp"
#include "zeroreg/object_matching.hpp"
#include "zeroreg/point_matching.hpp"
#include "zeroreg/projection.hpp"
#include "zeroreg/registration.hpp"
#include "zeroreg/scene_bundle.hpp"
#include "zeroreg/synthgen.hpp"

namespace zeroreg {

struct PipelineToggles {
  bool use_object_level = true;
  bool use_scene_graph = true;
  bool use_semantics = true;
  bool use_category_filter = true;
  bool single_view_mode = false;
  bool directed_affinity = false;
  bool category_hard_constraint = false;
};

struct PipelineConfig {
  int k_neighbors = 3;
  int sinkhorn_iterations = 20;
  double sinkhorn_temperature = 0.1;
  double gamma = 0.05;
  double slack = 1.0;
  int min_consensus = 10;  // object-level RANSAC inliers below this trigger global matching
  RansacOptions ransac;
  ProjectionConfig projection;
  QapOptions qap;
  PipelineToggles toggles;
  std::uint64_t seed = 0;  // RANSAC stream
};

/// Throws ValidationError naming the first out-of-range field.
void validate_config(const PipelineConfig& config);

/// JSON form: the fields above by name, with `ransac`, `projection`, `qap` and
/// `toggles` as nested objects. Missing keys keep the values already in `base`;
/// unknown keys throw ValidationError.
PipelineConfig parse_pipeline_config(const std::string& json_text, const PipelineConfig& base = {});
std::string pipeline_config_to_json(const PipelineConfig& config);

struct RegistrationReport {
  RigidTransformd transform;
  std::vector<IndexPair> object_pairs;  // (source region, target region)
  PointCorrespondences point_pairs;     // indices into the descriptor clouds
  Points3d source_points;               // matched coordinates, paired by column
  Points3d target_points;
  std::vector<std::pair<std::string, double>> stage_timings;  // milliseconds
  std::map<std::string, double> diagnostics;
  std::vector<std::vector<MaskRef>> source_region_masks;
  std::vector<std::vector<MaskRef>> target_region_masks;
  std::string projection_report;
};

inline constexpr const char* kStageProjection = "projection";
inline constexpr const char* kStageSceneGraph = "scene_graph";
inline constexpr const char* kStageObjectMatching = "object_matching";
inline constexpr const char* kStagePointMatching = "point_matching";
inline constexpr const char* kStageRegistration = "registration";

/// Full chain. Any stage error is rethrown as StageFailure naming the stage.
/// Global point matching is used when object matching yields no pair or fewer
/// than three point correspondences. When the object-level registration keeps
/// fewer than `min_consensus` RANSAC inliers, a global registration is also run
/// and the one with more inliers is kept.
RegistrationReport register_pair(const SceneBundle& source, const SceneBundle& target, const PipelineConfig& config);

std::string report_to_json(const RegistrationReport& report);

struct SuiteCase {
  std::string name;
  std::function<GeneratedPair()> load;  // may throw; counted as a failure
};

struct PairOutcome {
  std::string name;
  bool completed = false;
  std::string failure_stage;  // "load" or a pipeline stage
  std::string failure_reason;
  PairEvaluation evaluation;
  int correspondences = 0;
  int object_pairs = 0;
  int object_pairs_correct = 0;
  double runtime_ms = 0.0;
};

struct SuiteSummary {
  int pairs = 0;
  int failures = 0;
  double rr = 0.0;
  double mean_ir = 0.0;
  double re_mean = 0.0, re_median = 0.0;
  double te_mean = 0.0, te_median = 0.0;
  std::map<std::string, double> acc_at;
  double object_pair_precision = 0.0;
};

struct SuiteResult {
  std::vector<PairOutcome> outcomes;  // input order
  SuiteSummary summary;
};

/// Object pairs of `report` whose regions map onto a ground-truth object pair.
int count_correct_object_pairs(const RegistrationReport& report, const GroundTruth& truth);

PairOutcome evaluate_case(const SuiteCase& c, const PipelineConfig& config);

/// Runs every case (in parallel when jobs > 1) and aggregates. Failed pairs
/// count in the RR denominator and are excluded from the error statistics.
SuiteResult evaluate_suite(const std::vector<SuiteCase>& cases, const PipelineConfig& config, int jobs = 1);

SuiteSummary summarize(const std::vector<PairOutcome>& outcomes);
std::string summary_to_json(const SuiteSummary& summary);
std::string outcomes_to_csv(const std::vector<PairOutcome>& outcomes);

/// Cases generated in memory from a suite spec, pair i from sample_scene_spec(suite, i).
std::vector<SuiteCase> synthetic_suite(const SuiteSpec& suite, int pairs);

}  // namespace zeroreg
