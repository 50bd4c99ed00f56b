#include "zeroreg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "zeroreg/error.hpp"
#include "zeroreg/scene_graph.hpp"

namespace zeroreg {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void validate_config(const PipelineConfig& c) {
  const auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ValidationError(field, what);
  };
  require(c.k_neighbors >= 1, "k_neighbors", "must be >= 1");
  require(c.sinkhorn_iterations >= 1, "sinkhorn_iterations", "must be >= 1");
  require(c.sinkhorn_temperature > 0.0, "sinkhorn_temperature", "must be > 0");
  require(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma", "must lie in [0, 1]");
  require(c.slack >= 0.0 && std::isfinite(c.slack), "slack", "must be finite and >= 0");
  require(c.min_consensus >= 0, "min_consensus", "must be >= 0");
  require(c.ransac.max_iterations >= 1, "ransac.max_iterations", "must be >= 1");
  require(c.ransac.inlier_threshold > 0.0, "ransac.inlier_threshold", "must be > 0");
  require(c.ransac.confidence > 0.0 && c.ransac.confidence < 1.0, "ransac.confidence", "must lie in (0, 1)");
  require(c.projection.overlap_threshold > 0.0 && c.projection.overlap_threshold <= 1.0,
          "projection.overlap_threshold", "must lie in (0, 1]");
  require(c.projection.voxel_size > 0.0, "projection.voxel_size", "must be > 0");
  require(c.projection.merge_radius > 0.0, "projection.merge_radius", "must be > 0");
  require(c.qap.exact_limit >= 0, "qap.exact_limit", "must be >= 0");
  require(c.qap.max_iterations >= 1, "qap.max_iterations", "must be >= 1");
  require(c.qap.tolerance >= 0.0, "qap.tolerance", "must be >= 0");
}

namespace {

template <typename T>
void take(const json& j, const std::string& key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(prefix + key, e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& prefix) {
  if (!j.is_object()) throw ValidationError(prefix.empty() ? "config" : prefix, "expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError(prefix + key, "unknown config key");
  }
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, const PipelineConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  reject_unknown(j,
                 {"k_neighbors", "sinkhorn_iterations", "sinkhorn_temperature", "gamma", "slack", "min_consensus", "seed", "ransac",
                  "projection", "qap", "toggles"},
                 "");
  PipelineConfig c = base;
  take(j, "k_neighbors", c.k_neighbors, "");
  take(j, "sinkhorn_iterations", c.sinkhorn_iterations, "");
  take(j, "sinkhorn_temperature", c.sinkhorn_temperature, "");
  take(j, "gamma", c.gamma, "");
  take(j, "slack", c.slack, "");
  take(j, "min_consensus", c.min_consensus, "");
  take(j, "seed", c.seed, "");
  if (j.contains("ransac")) {
    const json& r = j.at("ransac");
    reject_unknown(r, {"max_iterations", "inlier_threshold", "confidence"}, "ransac.");
    take(r, "max_iterations", c.ransac.max_iterations, "ransac.");
    take(r, "inlier_threshold", c.ransac.inlier_threshold, "ransac.");
    take(r, "confidence", c.ransac.confidence, "ransac.");
  }
  if (j.contains("projection")) {
    const json& p = j.at("projection");
    reject_unknown(p, {"overlap_threshold", "voxel_size", "merge_radius"}, "projection.");
    take(p, "overlap_threshold", c.projection.overlap_threshold, "projection.");
    take(p, "voxel_size", c.projection.voxel_size, "projection.");
    take(p, "merge_radius", c.projection.merge_radius, "projection.");
  }
  if (j.contains("qap")) {
    const json& q = j.at("qap");
    reject_unknown(q, {"exact_limit", "max_iterations", "tolerance"}, "qap.");
    take(q, "exact_limit", c.qap.exact_limit, "qap.");
    take(q, "max_iterations", c.qap.max_iterations, "qap.");
    take(q, "tolerance", c.qap.tolerance, "qap.");
  }
  if (j.contains("toggles")) {
    const json& t = j.at("toggles");
    reject_unknown(t,
                   {"use_object_level", "use_scene_graph", "use_semantics", "use_category_filter", "single_view_mode",
                    "directed_affinity", "category_hard_constraint"},
                   "toggles.");
    take(t, "use_object_level", c.toggles.use_object_level, "toggles.");
    take(t, "use_scene_graph", c.toggles.use_scene_graph, "toggles.");
    take(t, "use_semantics", c.toggles.use_semantics, "toggles.");
    take(t, "use_category_filter", c.toggles.use_category_filter, "toggles.");
    take(t, "single_view_mode", c.toggles.single_view_mode, "toggles.");
    take(t, "directed_affinity", c.toggles.directed_affinity, "toggles.");
    take(t, "category_hard_constraint", c.toggles.category_hard_constraint, "toggles.");
  }
  validate_config(c);
  return c;
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["k_neighbors"] = c.k_neighbors;
  j["sinkhorn_iterations"] = c.sinkhorn_iterations;
  j["sinkhorn_temperature"] = c.sinkhorn_temperature;
  j["gamma"] = c.gamma;
  j["slack"] = c.slack;
  j["min_consensus"] = c.min_consensus;
  j["seed"] = c.seed;
  j["ransac"] = {{"max_iterations", c.ransac.max_iterations},
                 {"inlier_threshold", c.ransac.inlier_threshold},
                 {"confidence", c.ransac.confidence}};
  j["projection"] = {{"overlap_threshold", c.projection.overlap_threshold},
                     {"voxel_size", c.projection.voxel_size},
                     {"merge_radius", c.projection.merge_radius}};
  j["qap"] = {{"exact_limit", c.qap.exact_limit},
              {"max_iterations", c.qap.max_iterations},
              {"tolerance", c.qap.tolerance}};
  j["toggles"] = {{"use_object_level", c.toggles.use_object_level},
                  {"use_scene_graph", c.toggles.use_scene_graph},
                  {"use_semantics", c.toggles.use_semantics},
                  {"use_category_filter", c.toggles.use_category_filter},
                  {"single_view_mode", c.toggles.single_view_mode},
                  {"directed_affinity", c.toggles.directed_affinity},
                  {"category_hard_constraint", c.toggles.category_hard_constraint}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Registration

namespace {

class StageClock {
 public:
  explicit StageClock(RegistrationReport& report) : report_(report) {}

  template <typename F>
  auto run(const char* stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    const auto record = [&] {
      const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
      auto it = std::find_if(report_.stage_timings.begin(), report_.stage_timings.end(),
                             [&](const auto& e) { return e.first == stage; });
      if (it == report_.stage_timings.end()) {
        report_.stage_timings.emplace_back(stage, ms.count());
      } else {
        it->second += ms.count();
      }
    };
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record();
      } else {
        auto out = f();
        record();
        return out;
      }
    } catch (const StageFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw StageFailure(stage, e.what());
    }
  }

 private:
  RegistrationReport& report_;
};

std::vector<std::vector<MaskRef>> region_masks(const MaskedPointCloud& cloud) {
  std::vector<std::vector<MaskRef>> out;
  for (const auto& r : cloud.objects) out.push_back(r.source_masks);
  return out;
}

std::vector<std::string> region_labels(const MaskedPointCloud& cloud) {
  std::vector<std::string> out;
  for (const auto& r : cloud.objects) out.push_back(r.category_label);
  return out;
}

}  // namespace

RegistrationReport register_pair(const SceneBundle& source, const SceneBundle& target, const PipelineConfig& config) {
  validate_config(config);
  RegistrationReport report;
  StageClock clock(report);

  ProjectionConfig pc = config.projection;
  pc.single_view_mode = config.toggles.single_view_mode;
  auto [src, tgt] = clock.run(kStageProjection, [&] {
    if (source.semantic_dim() != target.semantic_dim()) throw ShapeError("semantic dimensions differ");
    if (source.geometric_dim() != target.geometric_dim()) throw ShapeError("geometric dimensions differ");
    ProjectedScene s = build_masked_cloud(source, pc);
    ProjectedScene t = build_masked_cloud(target, pc);
    if (!config.toggles.use_semantics) {
      for (auto* scene : {&s, &t}) {
        for (auto& region : scene->cloud.objects) {
          region.semantic = Eigen::VectorXd::Constant(region.semantic.size(), 1.0).normalized();
        }
      }
    }
    return std::make_pair(std::move(s), std::move(t));
  });
  report.source_region_masks = region_masks(src.cloud);
  report.target_region_masks = region_masks(tgt.cloud);
  report.projection_report = "[source]\n" + src.diagnostics.to_text() + "[target]\n" + tgt.diagnostics.to_text();
  report.diagnostics["source_regions"] = static_cast<double>(src.cloud.objects.size());
  report.diagnostics["target_regions"] = static_cast<double>(tgt.cloud.objects.size());
  report.diagnostics["source_descriptors"] = static_cast<double>(src.descriptors.size());
  report.diagnostics["target_descriptors"] = static_cast<double>(tgt.descriptors.size());
  report.diagnostics["dropped_pixels"] =
      static_cast<double>(src.diagnostics.dropped_pixels + tgt.diagnostics.dropped_pixels);
  report.diagnostics["discarded_tracks"] =
      static_cast<double>(src.diagnostics.discarded_tracks + tgt.diagnostics.discarded_tracks);

  PointMatchingConfig pm;
  pm.sinkhorn_iterations = config.sinkhorn_iterations;
  pm.temperature = config.sinkhorn_temperature;
  pm.gamma = config.gamma;
  pm.slack = config.slack;
  pm.global_fallback = true;

  bool fallback = false;
  if (config.toggles.use_object_level) {
    auto [gp, gq] = clock.run(kStageSceneGraph, [&] {
      return std::make_pair(build_scene_graph(src.cloud, config.k_neighbors, config.toggles.directed_affinity),
                            build_scene_graph(tgt.cloud, config.k_neighbors, config.toggles.directed_affinity));
    });
    const ObjectCorrespondences objects = clock.run(kStageObjectMatching, [&] {
      Eigen::MatrixXd c = cross_similarity(gp.node_semantics, gq.node_semantics);
      const auto lp = region_labels(src.cloud);
      const auto lq = region_labels(tgt.cloud);
      if (config.toggles.category_hard_constraint) c = apply_category_constraint(c, lp, lq);
      const AssignmentMatrix x = config.toggles.use_scene_graph ? solve_qap(gp.affinity, gq.affinity, c, config.qap)
                                                                : solve_similarity_matching(c);
      report.diagnostics["qap_objective"] = x.objective;
      if (config.toggles.use_category_filter) return filter_by_category(x, lp, lq);
      return ObjectCorrespondences{x.pairs()};
    });
    report.object_pairs = objects.pairs;
    fallback = objects.empty();
    report.point_pairs =
        clock.run(kStagePointMatching, [&] { return match_points(objects, src.descriptors, tgt.descriptors, pm); });
    if (!fallback && report.point_pairs.size() < 3) {
      fallback = true;
      report.point_pairs = clock.run(kStagePointMatching,
                                     [&] { return match_points_global(src.descriptors, tgt.descriptors, pm); });
    }
  } else {
    report.point_pairs = clock.run(kStagePointMatching,
                                   [&] { return match_points_global(src.descriptors, tgt.descriptors, pm); });
  }
  RansacOptions options = config.ransac;
  options.seed = config.seed;
  const auto gather = [&](const PointCorrespondences& corr, Points3d& p, Points3d& q) {
    const auto n = static_cast<Eigen::Index>(corr.size());
    p.resize(3, n);
    q.resize(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p.col(i) = src.descriptors.points.col(corr.pairs[i].source);
      q.col(i) = tgt.descriptors.points.col(corr.pairs[i].target);
    }
  };
  gather(report.point_pairs, report.source_points, report.target_points);
  RansacResult fit = clock.run(kStageRegistration,
                               [&] { return ransac_register(report.source_points, report.target_points, options); });

  if (config.toggles.use_object_level && !fallback &&
      static_cast<int>(fit.inlier_indices.size()) < config.min_consensus) {
    PointCorrespondences global = clock.run(
        kStagePointMatching, [&] { return match_points_global(src.descriptors, tgt.descriptors, pm); });
    if (global.size() >= 3) {
      Points3d p, q;
      gather(global, p, q);
      RansacResult global_fit = clock.run(kStageRegistration, [&] { return ransac_register(p, q, options); });
      if (global_fit.inlier_indices.size() > fit.inlier_indices.size()) {
        fallback = true;
        fit = std::move(global_fit);
        report.point_pairs = std::move(global);
        report.source_points = std::move(p);
        report.target_points = std::move(q);
      }
    }
  }
  report.diagnostics["global_fallback"] = fallback ? 1.0 : 0.0;
  report.diagnostics["object_pairs"] = static_cast<double>(report.object_pairs.size());
  report.diagnostics["point_correspondences"] = static_cast<double>(report.point_pairs.size());
  report.transform = fit.transform;
  report.diagnostics["ransac_inliers"] = static_cast<double>(fit.inlier_indices.size());
  report.diagnostics["ransac_iterations"] = static_cast<double>(fit.iterations_run);
  return report;
}

std::string report_to_json(const RegistrationReport& report) {
  json j;
  const auto t = report.transform.toRowMajor12();
  j["transform"] = std::vector<double>(t.begin(), t.end());
  j["object_pairs"] = report.object_pairs;
  json pairs = json::array();
  for (const auto& m : report.point_pairs.pairs) pairs.push_back({m.source, m.target, m.confidence, m.region});
  j["point_pairs"] = pairs;
  json timings = json::object();
  for (const auto& [stage, ms] : report.stage_timings) timings[stage] = ms;
  j["stage_timings_ms"] = timings;
  j["diagnostics"] = report.diagnostics;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Suites

namespace {

// Ground-truth object behind a region: the most frequent non-negative object
// over its masks, -1 when none.
int region_object(const std::vector<MaskRef>& masks, const std::vector<std::pair<MaskRef, int>>& map) {
  std::map<int, int> votes;
  for (const MaskRef& m : masks) {
    for (const auto& [ref, obj] : map) {
      if (ref == m && obj >= 0) ++votes[obj];
    }
  }
  int best = -1, best_votes = 0;
  for (const auto& [obj, v] : votes) {
    if (v > best_votes) {
      best = obj;
      best_votes = v;
    }
  }
  return best;
}

}  // namespace

int count_correct_object_pairs(const RegistrationReport& report, const GroundTruth& truth) {
  int correct = 0;
  for (const auto& [a, b] : report.object_pairs) {
    const int oa = region_object(report.source_region_masks.at(a), truth.source_mask_objects);
    const int ob = region_object(report.target_region_masks.at(b), truth.target_mask_objects);
    if (oa < 0 || ob < 0) continue;
    if (std::find(truth.object_pairs.begin(), truth.object_pairs.end(), IndexPair{oa, ob}) != truth.object_pairs.end()) {
      ++correct;
    }
  }
  return correct;
}

PairOutcome evaluate_case(const SuiteCase& c, const PipelineConfig& config) {
  PairOutcome out;
  out.name = c.name;
  const auto start = std::chrono::steady_clock::now();
  const auto finish = [&] {
    const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
    out.runtime_ms = ms.count();
  };
  GeneratedPair pair;
  try {
    pair = c.load();
  } catch (const std::exception& e) {
    out.failure_stage = "load";
    out.failure_reason = e.what();
    finish();
    return out;
  }
  try {
    const RegistrationReport report = register_pair(pair.source, pair.target, config);
    const double ir = report.source_points.cols() > 0
                          ? inlier_ratio(report.source_points, report.target_points, pair.truth.transform)
                          : 0.0;
    out.evaluation = evaluate_pair(report.transform, pair.truth.transform, pair.truth.overlap_points, ir);
    out.correspondences = static_cast<int>(report.point_pairs.size());
    out.object_pairs = static_cast<int>(report.object_pairs.size());
    out.object_pairs_correct = count_correct_object_pairs(report, pair.truth);
    out.completed = true;
  } catch (const StageFailure& e) {
    out.failure_stage = e.stage();
    out.failure_reason = e.reason();
  } catch (const std::exception& e) {
    out.failure_stage = "evaluation";
    out.failure_reason = e.what();
  }
  finish();
  return out;
}

SuiteResult evaluate_suite(const std::vector<SuiteCase>& cases, const PipelineConfig& config, int jobs) {
  if (cases.empty()) throw EmptyInputError("evaluate_suite: no pairs");
  validate_config(config);
  SuiteResult result;
  result.outcomes.resize(cases.size());
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cases.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < cases.size(); ++i) result.outcomes[i] = evaluate_case(cases[i], config);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) result.outcomes[i] = evaluate_case(cases[i], config);
      });
    }
    for (auto& t : pool) t.join();
  }
  result.summary = summarize(result.outcomes);
  return result;
}

SuiteSummary summarize(const std::vector<PairOutcome>& outcomes) {
  SuiteSummary s;
  s.pairs = static_cast<int>(outcomes.size());
  std::vector<PairEvaluation> evals;
  std::vector<double> re, te, ir;
  int object_pairs = 0, object_correct = 0;
  for (const auto& o : outcomes) {
    if (!o.completed) {
      ++s.failures;
      evals.push_back(PairEvaluation{});
      continue;
    }
    evals.push_back(o.evaluation);
    re.push_back(o.evaluation.rotation_error);
    te.push_back(o.evaluation.translation_error);
    ir.push_back(o.evaluation.inlier_ratio);
    object_pairs += o.object_pairs;
    object_correct += o.object_pairs_correct;
  }
  if (!evals.empty()) s.rr = registration_recall(evals);
  s.mean_ir = mean_of(ir);
  s.re_mean = mean_of(re);
  s.re_median = median_of(re);
  s.te_mean = mean_of(te);
  s.te_median = median_of(te);
  for (double deg : {5.0, 10.0, 45.0}) {
    std::ostringstream key;
    key << "re_" << deg << "deg";
    s.acc_at[key.str()] = accuracy_at(re, deg);
  }
  for (double cm : {5.0, 10.0, 25.0}) {
    std::ostringstream key;
    key << "te_" << cm << "cm";
    s.acc_at[key.str()] = accuracy_at(te, cm / 100.0);
  }
  s.object_pair_precision = object_pairs > 0 ? static_cast<double>(object_correct) / object_pairs : 0.0;
  return s;
}

std::string summary_to_json(const SuiteSummary& s) {
  json j;
  j["pairs"] = s.pairs;
  j["failures"] = s.failures;
  j["rr"] = s.rr;
  j["mean_ir"] = s.mean_ir;
  j["re_mean"] = s.re_mean;
  j["re_median"] = s.re_median;
  j["te_mean"] = s.te_mean;
  j["te_median"] = s.te_median;
  j["acc_at"] = s.acc_at;
  j["object_pair_precision"] = s.object_pair_precision;
  return j.dump(2);
}

std::string outcomes_to_csv(const std::vector<PairOutcome>& outcomes) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "pair,completed,failure_stage,rmse,registered,inlier_ratio,rotation_error_deg,translation_error_m,"
         "correspondences,object_pairs,object_pairs_correct,runtime_ms\n";
  for (const auto& o : outcomes) {
    const auto& e = o.evaluation;
    out << o.name << ',' << (o.completed ? 1 : 0) << ',' << o.failure_stage << ',' << e.rmse << ','
        << (e.registered ? 1 : 0) << ',' << e.inlier_ratio << ',' << e.rotation_error << ',' << e.translation_error
        << ',' << o.correspondences << ',' << o.object_pairs << ',' << o.object_pairs_correct << ',' << o.runtime_ms
        << '\n';
  }
  return out.str();
}

std::vector<SuiteCase> synthetic_suite(const SuiteSpec& suite, int pairs) {
  std::vector<SuiteCase> cases;
  for (int i = 0; i < pairs; ++i) {
    const SceneSpec spec = sample_scene_spec(suite, i);
    std::ostringstream name;
    name << "pair_" << std::setw(4) << std::setfill('0') << i;
    cases.push_back({name.str(), [spec] { return generate_pair(spec); }});
  }
  return cases;
}

}  // namespace zeroreg
