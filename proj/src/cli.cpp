#include "zeroreg/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <spdlog/logger.h>
#include <spdlog/sinks/ostream_sink.h>
#include <sstream>

#include "zeroreg/error.hpp"
#include "zeroreg/pipeline.hpp"
#include "zeroreg/scene_graph.hpp"
#include "zeroreg/synthgen.hpp"

namespace zeroreg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kPrecedence =
    "Pipeline settings: command-line flag > --config file > built-in default.";

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto logger = std::make_shared<spdlog::logger>("zeroreg", std::make_shared<spdlog::sinks::ostream_sink_mt>(err));
  logger->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("ZEROREG_LOG")) {
    const std::string v = env;
    if (v == "error") level = spdlog::level::err;
    else if (v == "warn") level = spdlog::level::warn;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
  }
  logger->set_level(level);
  return logger;
}

std::string read_text(const fs::path& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw ValidationError(flag, "file does not exist: " + path.string());
  std::ifstream in(path);
  if (!in) throw ValidationError(flag, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw WriteError(path.string(), "cannot open for writing");
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw WriteError(path.string(), "write failed");
}

void require_dir(const fs::path& path, const std::string& flag) {
  if (!fs::is_directory(path)) throw ValidationError(flag, "directory does not exist: " + path.string());
}

// Pipeline flags shared by register, eval and inspect. Unset flags leave the
// file/default value untouched.
struct PipelineFlags {
  std::string config_path;
  std::optional<int> k_neighbors, sinkhorn_iterations, min_consensus, ransac_iterations;
  std::optional<double> temperature, gamma, inlier_threshold;
  std::optional<std::uint64_t> seed;
  bool no_object_level = false, no_scene_graph = false, no_semantics = false, no_category_filter = false;
  bool single_view = false, directed = false, hard_constraint = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
    app->add_option("--k", k_neighbors, "Scene-graph neighbours");
    app->add_option("--sinkhorn-iterations", sinkhorn_iterations, "Sinkhorn iterations");
    app->add_option("--temperature", temperature, "Sinkhorn temperature");
    app->add_option("--gamma", gamma, "Transport threshold for correspondences");
    app->add_option("--min-consensus", min_consensus, "Object-level inliers below which global matching is tried");
    app->add_option("--ransac-iterations", ransac_iterations, "RANSAC iteration cap");
    app->add_option("--inlier-threshold", inlier_threshold, "RANSAC inlier distance (m)");
    app->add_option("--seed", seed, "RANSAC seed");
    app->add_flag("--no-object-level", no_object_level, "Match points globally");
    app->add_flag("--no-scene-graph", no_scene_graph, "Match objects by similarity only");
    app->add_flag("--no-semantics", no_semantics, "Replace semantic vectors by a constant");
    app->add_flag("--no-category-filter", no_category_filter, "Keep label-mismatched object pairs");
    app->add_flag("--single-view", single_view, "Keep objects seen in one view only");
    app->add_flag("--directed", directed, "Directed kNN affinity");
    app->add_flag("--hard-constraint", hard_constraint, "Penalize label-mismatched pairs inside the solver");
    app->footer(kPrecedence);
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_path.empty()) c = parse_pipeline_config(read_text(config_path, "--config"));
    if (k_neighbors) c.k_neighbors = *k_neighbors;
    if (sinkhorn_iterations) c.sinkhorn_iterations = *sinkhorn_iterations;
    if (temperature) c.sinkhorn_temperature = *temperature;
    if (gamma) c.gamma = *gamma;
    if (min_consensus) c.min_consensus = *min_consensus;
    if (ransac_iterations) c.ransac.max_iterations = *ransac_iterations;
    if (inlier_threshold) c.ransac.inlier_threshold = *inlier_threshold;
    if (seed) c.seed = *seed;
    if (no_object_level) c.toggles.use_object_level = false;
    if (no_scene_graph) c.toggles.use_scene_graph = false;
    if (no_semantics) c.toggles.use_semantics = false;
    if (no_category_filter) c.toggles.use_category_filter = false;
    if (single_view) c.toggles.single_view_mode = true;
    if (directed) c.toggles.directed_affinity = true;
    if (hard_constraint) c.toggles.category_hard_constraint = true;
    validate_config(c);
    return c;
  }
};

std::string transform_line(const RigidTransformd& t) {
  std::ostringstream s;
  s << std::setprecision(12);
  const auto v = t.toRowMajor12();
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
  return s.str();
}

std::string pair_name(int i) {
  std::ostringstream s;
  s << "pair_" << std::setw(4) << std::setfill('0') << i;
  return s.str();
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string spec_path, out;
  int pairs = 1;
  std::optional<std::uint64_t> seed;
};

int do_synth(const SynthArgs& a, bool as_json, std::ostream& out, spdlog::logger& log) {
  if (a.pairs < 1) throw ValidationError("--pairs", "must be >= 1");
  SuiteSpec suite = default_suite_spec();
  if (!a.spec_path.empty()) suite = parse_suite_spec(read_text(a.spec_path, "--spec"));
  if (a.seed) suite.base.seed = *a.seed;
  const fs::path root(a.out);
  fs::create_directories(root);
  json listing = json::array();
  for (int i = 0; i < a.pairs; ++i) {
    const SceneSpec spec = sample_scene_spec(suite, i);
    const GeneratedPair pair = generate_pair(spec);
    write_pair(pair, root / pair_name(i));
    log.info("wrote {} ({} objects, {} duplicates, overlap {:.2f})", pair_name(i), spec.object_count,
             spec.duplicates_per_category, spec.overlap_ratio);
    listing.push_back({{"pair", pair_name(i)},
                       {"object_count", spec.object_count},
                       {"duplicates_per_category", spec.duplicates_per_category},
                       {"overlap_ratio", spec.overlap_ratio},
                       {"seed", spec.seed}});
  }
  if (as_json) {
    out << json{{"out", root.string()}, {"pairs", listing}}.dump() << '\n';
  } else {
    out << "wrote " << a.pairs << " pair(s) to " << root.string() << '\n';
  }
  return kExitOk;
}

// --- register --------------------------------------------------------------

struct RegisterArgs {
  std::string source, target, out;
  PipelineFlags flags;
};

int do_register(const RegisterArgs& a, bool as_json, std::ostream& out, spdlog::logger& log) {
  require_dir(a.source, "--source");
  require_dir(a.target, "--target");
  const PipelineConfig config = a.flags.resolve();
  const SceneBundle source = read_bundle(a.source);
  const SceneBundle target = read_bundle(a.target);
  log.info("registering {} -> {}", a.source, a.target);
  const RegistrationReport report = register_pair(source, target, config);
  json j = json::parse(report_to_json(report));
  j["projection_report"] = report.projection_report;
  if (!a.out.empty()) write_text(a.out, j.dump(2));
  if (as_json) {
    out << j.dump() << '\n';
  } else {
    out << "transform: " << transform_line(report.transform) << '\n'
        << "object pairs: " << report.object_pairs.size() << '\n'
        << "point correspondences: " << report.point_pairs.size() << '\n'
        << "ransac inliers: " << report.diagnostics.at("ransac_inliers") << '\n'
        << report.projection_report;
  }
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string suite, out, csv;
  int jobs = 1;
  PipelineFlags flags;
};

int do_eval(const EvalArgs& a, bool as_json, std::ostream& out, spdlog::logger& log) {
  require_dir(a.suite, "--suite");
  if (a.jobs < 1) throw ValidationError("--jobs", "must be >= 1");
  const PipelineConfig config = a.flags.resolve();
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(a.suite)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ValidationError("--suite", "no pair directories in " + a.suite);
  std::vector<SuiteCase> cases;
  for (const auto& d : dirs) cases.push_back({d.filename().string(), [d] { return read_pair(d); }});
  const SuiteResult result = evaluate_suite(cases, config, a.jobs);
  for (const auto& o : result.outcomes) {
    if (!o.completed) log.warn("{} failed at {}: {}", o.name, o.failure_stage, o.failure_reason);
  }
  const std::string summary = summary_to_json(result.summary);
  write_text(a.out, summary);
  fs::path csv = a.csv;
  if (csv.empty()) csv = fs::path(a.out).replace_extension(".pairs.csv");
  write_text(csv, outcomes_to_csv(result.outcomes));
  if (as_json) {
    out << json::parse(summary).dump() << '\n';
  } else {
    const SuiteSummary& s = result.summary;
    out << "pairs: " << s.pairs << " (failures: " << s.failures << ")\n"
        << "RR: " << s.rr << "  mean IR: " << s.mean_ir << '\n'
        << "RE mean/median (deg): " << s.re_mean << " / " << s.re_median << '\n'
        << "TE mean/median (m): " << s.te_mean << " / " << s.te_median << '\n';
  }
  return kExitOk;
}

// --- inspect ---------------------------------------------------------------

struct InspectArgs {
  std::string bundle, target, out;
  bool dump_graph = false, dump_corr = false;
  PipelineFlags flags;
};

void matrix_csv(std::ostream& s, const std::string& name, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) s << name << ',' << r << ',' << c << ',' << m(r, c) << '\n';
  }
}

int do_inspect(const InspectArgs& a, bool as_json, std::ostream& out, spdlog::logger& log) {
  require_dir(a.bundle, "--bundle");
  if (!a.target.empty()) require_dir(a.target, "--target");
  if ((a.dump_graph || a.dump_corr) && a.out.empty()) throw ValidationError("--out", "required with a dump flag");
  if (a.dump_corr && a.target.empty()) throw ValidationError("--target", "required with --dump-corr");
  const PipelineConfig config = a.flags.resolve();
  ProjectionConfig pc = config.projection;
  pc.single_view_mode = config.toggles.single_view_mode;
  const SceneBundle source = read_bundle(a.bundle);

  if (a.dump_corr) {
    const SceneBundle target = read_bundle(a.target);
    const RegistrationReport report = register_pair(source, target, config);
    std::ostringstream csv;
    csv << std::setprecision(10) << "source,target,confidence,region\n";
    for (const auto& m : report.point_pairs.pairs) {
      csv << m.source << ',' << m.target << ',' << m.confidence << ',' << m.region << '\n';
    }
    write_text(a.out, csv.str());
    if (as_json) {
      out << json{{"correspondences", report.point_pairs.size()}, {"out", a.out}}.dump() << '\n';
    } else {
      out << "wrote " << report.point_pairs.size() << " correspondences to " << a.out << '\n';
    }
    return kExitOk;
  }

  const ProjectedScene scene = build_masked_cloud(source, pc);
  if (a.dump_graph) {
    const SceneGraphRep gp = build_scene_graph(scene.cloud, config.k_neighbors, config.toggles.directed_affinity);
    std::ostringstream csv;
    csv << std::setprecision(10) << "matrix,row,col,value\n";
    matrix_csv(csv, "W_source", gp.affinity);
    if (!a.target.empty()) {
      const ProjectedScene tscene = build_masked_cloud(read_bundle(a.target), pc);
      const SceneGraphRep gq = build_scene_graph(tscene.cloud, config.k_neighbors, config.toggles.directed_affinity);
      const Eigen::MatrixXd c = cross_similarity(gp.node_semantics, gq.node_semantics);
      matrix_csv(csv, "W_target", gq.affinity);
      matrix_csv(csv, "C", c);
      const AssignmentMatrix x = solve_qap(gp.affinity, gq.affinity, c, config.qap);
      const auto pairs = x.pairs();
      // Per-pair share: its similarity reward plus the structural residual of
      // its edges to the other matched pairs.
      for (const auto& [p, q] : pairs) {
        double structural = 0.0;
        for (const auto& [p2, q2] : pairs) {
          if (p2 == p) continue;
          const double d = gp.affinity(p, p2) - gq.affinity(q, q2);
          structural += d * d;
        }
        csv << "assignment," << p << ',' << q << ',' << structural - c(p, q) << '\n';
      }
      log.info("qap objective {}", x.objective);
    }
    write_text(a.out, csv.str());
    if (as_json) {
      out << json{{"nodes", gp.size()}, {"out", a.out}}.dump() << '\n';
    } else {
      out << "wrote graph of " << gp.size() << " nodes to " << a.out << '\n';
    }
    return kExitOk;
  }

  if (as_json) {
    json j;
    j["bundle_id"] = source.bundle_id;
    j["frames"] = source.frames.size();
    j["masks"] = source.masks.size();
    j["regions"] = scene.cloud.objects.size();
    j["points"] = scene.cloud.all_points.cols();
    j["descriptors"] = scene.descriptors.size();
    j["projection_report"] = scene.diagnostics.to_text();
    out << j.dump() << '\n';
  } else {
    out << "bundle: " << source.bundle_id << '\n'
        << "frames: " << source.frames.size() << "  masks: " << source.masks.size() << '\n'
        << "regions: " << scene.cloud.objects.size() << "  points: " << scene.cloud.all_points.cols()
        << "  descriptors: " << scene.descriptors.size() << '\n'
        << scene.diagnostics.to_text();
  }
  if (!a.out.empty()) write_text(a.out, scene.diagnostics.to_text());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot point-cloud registration from scene bundles", "zeroreg"};
  app.require_subcommand(1);
  app.fallthrough();
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable output on stdout");
  app.footer(std::string(kPrecedence) + "\nEnvironment: ZEROREG_LOG=error|warn|info|debug sets stderr verbosity.");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate synthetic bundle pairs with ground truth");
  synth_cmd->add_option("--spec", synth.spec_path, "Scene spec JSON (ranges allowed)")->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--pairs", synth.pairs, "Number of pairs");
  synth_cmd->add_option("--seed", synth.seed, "Suite seed (overrides the spec)");

  RegisterArgs reg;
  CLI::App* reg_cmd = app.add_subcommand("register", "Register a source bundle onto a target bundle");
  reg_cmd->add_option("--source", reg.source, "Source bundle directory")->required();
  reg_cmd->add_option("--target", reg.target, "Target bundle directory")->required();
  reg_cmd->add_option("--out", reg.out, "Report JSON path");
  reg.flags.attach(reg_cmd);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a suite of pairs with ground truth");
  eval_cmd->add_option("--suite", ev.suite, "Directory of pair directories")->required();
  eval_cmd->add_option("--out", ev.out, "Summary JSON path")->required();
  eval_cmd->add_option("--csv", ev.csv, "Per-pair CSV path (default: <out>.pairs.csv)");
  eval_cmd->add_option("--jobs", ev.jobs, "Pairs evaluated in parallel");
  ev.flags.attach(eval_cmd);

  InspectArgs ins;
  CLI::App* ins_cmd = app.add_subcommand("inspect", "Inspect a bundle, its scene graph or correspondences");
  ins_cmd->add_option("--bundle", ins.bundle, "Bundle directory")->required();
  ins_cmd->add_option("--target", ins.target, "Second bundle for matching dumps");
  ins_cmd->add_option("--out", ins.out, "CSV path");
  CLI::Option* graph_flag = ins_cmd->add_flag("--dump-graph", ins.dump_graph, "Dump W, C and the assignment");
  CLI::Option* corr_flag = ins_cmd->add_flag("--dump-corr", ins.dump_corr, "Dump point correspondences");
  graph_flag->excludes(corr_flag);
  ins.flags.attach(ins_cmd);

  std::vector<const char*> argv{"zeroreg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (CLI::App* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  auto log = make_logger(err);
  try {
    if (app.got_subcommand(synth_cmd)) return do_synth(synth, as_json, out, *log);
    if (app.got_subcommand(reg_cmd)) return do_register(reg, as_json, out, *log);
    if (app.got_subcommand(eval_cmd)) return do_eval(ev, as_json, out, *log);
    return do_inspect(ins, as_json, out, *log);
  } catch (const InputError& e) {
    log->error("{}", e.what());
    return kExitValidation;
  } catch (const StageFailure& e) {
    log->error("stage {} failed: {}", e.stage(), e.reason());
    return kExitRuntime;
  } catch (const std::exception& e) {
    log->error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace zeroreg::cli
