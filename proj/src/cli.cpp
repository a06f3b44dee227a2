#include "crowdlf/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdlf/baselines.hpp"
#include "crowdlf/io.hpp"
#include "crowdlf/kernels.hpp"
#include "crowdlf/label_inference.hpp"
#include "crowdlf/model_selection.hpp"
#include "crowdlf/optimizer.hpp"
#include "crowdlf/rng.hpp"
#include "crowdlf/simulation.hpp"

namespace crowdlf {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

constexpr uint64_t kTagBenchData = 41;
constexpr uint64_t kTagBenchFit = 42;

struct DataError {
  std::string message;
};

void print_errors(const std::vector<std::string>& errors) {
  for (const std::string& e : errors) std::fprintf(stderr, "error: %s\n", e.c_str());
}

LabelMatrix require_labels(const std::filesystem::path& path) {
  Loaded<LabelMatrix> loaded = load_labels_csv(path);
  if (!loaded.ok()) {
    print_errors(loaded.errors);
    throw DataError{"could not load labels from " + path.string()};
  }
  return std::move(*loaded.value);
}

void add_config_flags(CLI::App* cmd, ModelConfig& config, std::string& init_name) {
  cmd->add_option("-k,--dim", config.dim, "Latent factor dimension");
  cmd->add_option("-D,--groups", config.num_worker_groups, "Number of worker groups");
  cmd->add_option("--lambda", config.lambda, "Grouping penalty weight");
  cmd->add_option("--eta", config.eta, "Rotation step size");
  cmd->add_option("--tol", config.tol, "Convergence tolerance on the penalized loss");
  cmd->add_option("--max-outer", config.max_outer, "Maximum outer iterations");
  cmd->add_option("--max-inner", config.max_inner, "Gradient steps per factor block");
  cmd->add_option("--init", init_name, "Initialization scheme: random, mv, or ds")
      ->check(CLI::IsMember({"random", "mv", "ds"}));
  cmd->add_option("--seed", config.seed, "Master seed");
}

void apply_init_name(ModelConfig& config, const std::string& init_name) {
  if (!parse_init_scheme(init_name, &config.init)) {
    throw CLI::ValidationError("--init", "unknown scheme '" + init_name + "'");
  }
}

LabelDecision decide_for(const LabelMatrix& labels, const FitState& state) {
  const Centroids centroids = compute_centroids(state.factors, state.memberships,
                                                labels.num_categories,
                                                state.rotations.num_groups);
  const AlignedCentroids aligned = align_centroids(centroids, state.rotations);
  return decide_labels(centroids, aligned, state.memberships);
}

// Smallest over task groups of the gap between the winning category's score
// and the runner-up category's score (each maximized over worker groups).
// A large value means every group's category choice is unambiguous; values
// near zero mark decisions where a small perturbation would permute labels.
double decision_min_margin(const LabelMatrix& labels, const FitState& state) {
  const int C = labels.num_categories;
  const int D = state.rotations.num_groups;
  const int k = state.factors.dim();
  const Centroids cent = compute_centroids(state.factors, state.memberships, C, D);
  const AlignedCentroids aligned = align_centroids(cent, state.rotations);
  const auto& ops = kernels::active();
  double min_margin = std::numeric_limits<double>::infinity();
  for (int g = 0; g < C; ++g) {
    double top = -std::numeric_limits<double>::infinity();
    double second = top;
    for (int c = 0; c < C; ++c) {
      double cat = -std::numeric_limits<double>::infinity();
      for (int d = 0; d < D; ++d) {
        const double s = ops.dot(cent.task_centroids.row(g).data(), aligned.at(c, d).data(),
                                 static_cast<size_t>(k));
        cat = std::max(cat, s);
      }
      if (cat > top) {
        second = top;
        top = cat;
      } else {
        second = std::max(second, cat);
      }
    }
    min_margin = std::min(min_margin, top - second);
  }
  return min_margin;
}

// Best-of-R fits with seeds derived from the base seed; R=1 is a plain fit.
// Odd-numbered restarts switch to the random scheme so the pool is not tied
// to one deterministic starting structure. A fit whose label decision is
// clean (no two task groups land on the same category, no degenerate scores)
// is preferred over any fit with a flagged decision; within each class the
// larger min decision margin wins. The objective cannot arbitrate here — a
// fused- or permuted-category local minimum can undercut a clean one's loss —
// while near-zero margins reliably mark those pathologies.
FitState fit_with_restarts(const LabelMatrix& labels, ModelConfig config, int restarts,
                           uint64_t tag, uint64_t index) {
  FitState best;
  bool best_flagged = true;
  double best_margin = -1.0;
  for (int r = 0; r < restarts; ++r) {
    ModelConfig attempt = config;
    if (restarts > 1 || tag != 0) {
      attempt.seed = derive_seed(config.seed, tag, index * 64 + r);
    }
    if (r % 2 == 1) attempt.init = InitScheme::kRandom;
    FitState state = fit(labels, attempt);
    if (restarts <= 1) return state;
    const LabelDecision decision = decide_for(labels, state);
    const bool flagged = decision.collision || decision.degenerate;
    const double margin = decision_min_margin(labels, state);
    if (r == 0 || std::make_pair(flagged, -margin) <
                      std::make_pair(best_flagged, -best_margin)) {
      best_flagged = flagged;
      best_margin = margin;
      best = std::move(state);
    }
  }
  return best;
}

double stderr_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) /
                   static_cast<double>(xs.size()));
}

double mean_of(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  return xs.empty() ? 0.0 : mean / static_cast<double>(xs.size());
}

// A bad catalogue name is a usage problem, not a data problem: print the
// catalogue and let the caller return the usage exit code.
bool scenario_known(const std::string& name) {
  for (const std::string& s : builtin_scenario_names()) {
    if (s == name) return true;
  }
  std::string msg = "unknown scenario '" + name + "'; available:";
  for (const std::string& s : builtin_scenario_names()) msg += " " + s;
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  return false;
}

int cmd_simulate(const std::string& scenario_name, const std::string& spec_path,
                 std::optional<uint64_t> seed, const std::string& out_labels,
                 const std::string& out_truth) {
  ScenarioSpec spec;
  if (!scenario_name.empty()) {
    spec = builtin_scenario(scenario_name);
  } else {
    Loaded<ScenarioSpec> loaded = load_scenario_json(spec_path);
    if (!loaded.ok()) {
      print_errors(loaded.errors);
      return kExitData;
    }
    spec = std::move(*loaded.value);
  }
  if (seed) spec.seed = *seed;
  const SimulatedData data = generate(spec);
  write_labels_csv(out_labels, data.labels);
  write_truth_json(out_truth, spec, data.truth);
  std::printf("scenario %s: %d tasks, %d workers, %zu observed labels\n",
              spec.name.empty() ? "(custom)" : spec.name.c_str(), spec.num_tasks,
              spec.num_workers, data.labels.entries.size());
  std::printf("labels -> %s\ntruth  -> %s\n", out_labels.c_str(), out_truth.c_str());
  return kExitOk;
}

int cmd_fit(const std::string& labels_path, ModelConfig config, const std::string& init_name,
            int restarts, const std::string& out_model, const std::string& out_trace,
            const std::string& out_pred) {
  apply_init_name(config, init_name);
  const LabelMatrix labels = require_labels(labels_path);
  const ValidationReport report = validate(config, labels);
  if (!report.ok) {
    print_errors(report.problems);
    return kExitData;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const FitState state = fit_with_restarts(labels, config, restarts, 0, 0);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const LabelDecision decision = decide_for(labels, state);
  write_model_json(out_model, config, labels, state, decision);
  if (!out_trace.empty()) write_trace_tsv(out_trace, state);
  if (!out_pred.empty()) write_predictions_csv(out_pred, decision.task_labels);

  const double final_loss = state.trace.empty() ? state.initial_loss : state.trace.back().total;
  std::printf("fit: %d iterations, %s, loss %.17g -> %.17g (%.2fs)\n", state.iterations,
              state.converged ? "converged" : "max iterations reached", state.initial_loss,
              final_loss, secs);
  for (const std::string& w : state.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("model -> %s\n", out_model.c_str());
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& out_pred) {
  Loaded<ModelFile> loaded = load_model_json(model_path);
  if (!loaded.ok()) {
    print_errors(loaded.errors);
    return kExitData;
  }
  write_predictions_csv(out_pred, loaded.value->decision.task_labels);
  std::printf("%zu predicted labels -> %s\n", loaded.value->decision.task_labels.size(),
              out_pred.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& truth_path, const std::vector<std::string>& pred_args,
             const std::string& out_json) {
  Loaded<TruthFile> truth = load_truth_json(truth_path);
  if (!truth.ok()) {
    print_errors(truth.errors);
    return kExitData;
  }
  // Arguments are name=path; a repeated name groups replicate files.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> groups;
  for (const std::string& arg : pred_args) {
    const size_t eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
      std::fprintf(stderr, "error: --pred expects name=path, got '%s'\n", arg.c_str());
      return kExitUsage;
    }
    const std::string name = arg.substr(0, eq);
    if (!groups.count(name)) order.push_back(name);
    groups[name].push_back(arg.substr(eq + 1));
  }

  json rows = json::array();
  std::printf("%-12s %8s %10s %6s\n", "method", "mean", "stderr", "files");
  for (const std::string& name : order) {
    std::vector<double> accs;
    for (const std::string& path : groups[name]) {
      Loaded<std::vector<int>> preds = load_predictions_csv(path);
      if (!preds.ok()) {
        print_errors(preds.errors);
        return kExitData;
      }
      if (preds.value->size() != truth.value->task_labels.size()) {
        std::fprintf(stderr, "error: %s has %zu tasks but the truth file has %zu\n",
                     path.c_str(), preds.value->size(), truth.value->task_labels.size());
        return kExitData;
      }
      accs.push_back(accuracy(*preds.value, truth.value->task_labels));
    }
    const double mean = mean_of(accs);
    const double se = stderr_of(accs);
    std::printf("%-12s %8.4f %10.4f %6zu\n", name.c_str(), mean, se, accs.size());
    rows.push_back(json{{"method", name},
                        {"accuracy_mean", mean},
                        {"accuracy_stderr", se},
                        {"files", accs.size()}});
  }
  if (!out_json.empty()) {
    std::ofstream out(out_json, std::ios::binary | std::ios::trunc);
    out << json{{"truth", truth_path}, {"methods", std::move(rows)}}.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_tune(const std::string& labels_path, ModelConfig base, const std::string& init_name,
             TuningGrid grid, const std::string& out_json, const std::string& out_tsv) {
  apply_init_name(base, init_name);
  const LabelMatrix labels = require_labels(labels_path);
  const TuningReport report = tune(labels, grid, base);
  if (!out_json.empty()) write_tuning_json(out_json, report);
  if (!out_tsv.empty()) write_tuning_tsv(out_tsv, report);
  std::printf("chosen: D=%d lambda=%g k=%d\n", report.chosen_D, report.chosen_lambda,
              report.chosen_k);
  for (const std::string& w : report.warnings) std::printf("warning: %s\n", w.c_str());
  return kExitOk;
}

int cmd_bench(const std::string& scenario_name, int reps, const std::string& methods_arg,
              ModelConfig config, const std::string& init_name, int restarts, uint64_t seed,
              const std::string& out_json) {
  apply_init_name(config, init_name);
  const ScenarioSpec base_spec = builtin_scenario(scenario_name);

  std::vector<std::string> methods;
  {
    std::string cur;
    for (char ch : methods_arg + ",") {
      if (ch == ',') {
        if (!cur.empty()) methods.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }
  for (const std::string& mth : methods) {
    if (mth != "proposed" && mth != "mv" && mth != "ds") {
      std::fprintf(stderr, "error: unknown method '%s' (use proposed, mv, ds)\n", mth.c_str());
      return kExitUsage;
    }
  }
  if (methods.empty() || reps < 1) {
    std::fprintf(stderr, "error: need at least one method and one replication\n");
    return kExitUsage;
  }

  std::map<std::string, std::vector<double>> acc;
  std::vector<double> err_task, err_worker, iters;
  int failures = 0;
  for (int rep = 0; rep < reps; ++rep) {
    ScenarioSpec spec = base_spec;
    spec.seed = derive_seed(seed, kTagBenchData, rep);
    const SimulatedData data = generate(spec);
    for (const std::string& mth : methods) {
      try {
        if (mth == "mv") {
          acc[mth].push_back(accuracy(majority_vote(data.labels), data.truth.task_labels));
        } else if (mth == "ds") {
          acc[mth].push_back(
              accuracy(dawid_skene(data.labels).hard_labels, data.truth.task_labels));
        } else {
          ModelConfig c = config;
          c.seed = derive_seed(seed, kTagBenchFit, rep);
          const FitState state = fit_with_restarts(data.labels, c, restarts, kTagBenchFit + 1,
                                                   static_cast<uint64_t>(rep));
          const LabelDecision decision = decide_for(data.labels, state);
          acc[mth].push_back(accuracy(decision.task_labels, data.truth.task_labels));
          err_task.push_back(membership_error(state.memberships.task_groups,
                                              data.truth.memberships.task_groups,
                                              data.labels.num_categories));
          err_worker.push_back(membership_error(state.memberships.worker_groups,
                                                data.truth.memberships.worker_groups,
                                                std::max(config.num_worker_groups,
                                                         base_spec.num_worker_groups)));
          iters.push_back(state.iterations);
        }
      } catch (const std::exception& e) {
        ++failures;
        std::fprintf(stderr, "rep %d %s failed: %s\n", rep, mth.c_str(), e.what());
      }
    }
  }

  json rows = json::array();
  std::printf("%-12s %8s %10s %6s\n", "method", "mean", "stderr", "runs");
  for (const std::string& mth : methods) {
    const std::vector<double>& xs = acc[mth];
    std::printf("%-12s %8.4f %10.4f %6zu\n", mth.c_str(), mean_of(xs), stderr_of(xs),
                xs.size());
    json row{{"method", mth},
             {"accuracy_mean", mean_of(xs)},
             {"accuracy_stderr", stderr_of(xs)},
             {"runs", xs.size()}};
    if (mth == "proposed" && !err_task.empty()) {
      row["err_task_mean"] = mean_of(err_task);
      row["err_worker_mean"] = mean_of(err_worker);
      row["iterations_mean"] = mean_of(iters);
      std::printf("  err_task %.4f  err_worker %.4f  iterations %.2f\n", mean_of(err_task),
                  mean_of(err_worker), mean_of(iters));
    }
    rows.push_back(std::move(row));
  }
  if (!out_json.empty()) {
    std::ofstream out(out_json, std::ios::binary | std::ios::trunc);
    out << json{{"scenario", scenario_name},
                {"replications", reps},
                {"seed", seed},
                {"failures", failures},
                {"methods", std::move(rows)}}
               .dump(2)
        << "\n";
  }
  return kExitOk;
}

int cmd_convert(const std::string& raw_path, const std::string& raw_truth,
                const std::string& out_labels, const std::string& out_truth,
                const std::string& out_map) {
  std::optional<std::filesystem::path> truth_path;
  if (!raw_truth.empty()) truth_path = raw_truth;
  Loaded<ConvertResult> converted = convert_raw_csv(raw_path, truth_path);
  if (!converted.ok()) {
    print_errors(converted.errors);
    return kExitData;
  }
  write_labels_csv(out_labels, converted.value->labels);
  if (!out_map.empty()) write_id_map_json(out_map, *converted.value);
  if (!raw_truth.empty() && !out_truth.empty()) {
    write_truth_labels_json(out_truth, converted.value->truth_labels);
  }
  std::printf("%d tasks, %d workers, %d label values, %zu entries -> %s\n",
              converted.value->labels.num_tasks, converted.value->labels.num_workers,
              converted.value->labels.num_categories, converted.value->labels.entries.size(),
              out_labels.c_str());
  return kExitOk;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"Crowd label aggregation via grouped latent factors"};
  app.require_subcommand(1);

  std::string kernels_override;
  app.add_option("--kernels", kernels_override, "Force a kernel backend: scalar or avx2")
      ->check(CLI::IsMember({"scalar", "avx2"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string sim_scenario, sim_spec;
  std::optional<uint64_t> sim_seed;
  std::string sim_out_labels = "labels.csv", sim_out_truth = "truth.json";
  auto* scen_opt = sim->add_option("--scenario", sim_scenario,
                                   "Built-in scenario name (see --list)");
  sim->add_option("--spec", sim_spec, "Scenario spec JSON file")->excludes(scen_opt);
  sim->add_option("--seed", sim_seed, "Override the scenario seed");
  sim->add_option("--out-labels", sim_out_labels, "Output label CSV path");
  sim->add_option("--out-truth", sim_out_truth, "Output ground-truth JSON path");
  bool sim_list = false;
  sim->add_flag("--list", sim_list, "List built-in scenarios and exit");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit the grouped latent factor model");
  std::string fit_labels, fit_out_model = "model.json", fit_out_trace, fit_out_pred;
  std::string fit_init = "ds";
  int fit_restarts = 1;
  ModelConfig fit_config;
  fit_cmd->add_option("--labels", fit_labels, "Input label CSV")->required();
  add_config_flags(fit_cmd, fit_config, fit_init);
  fit_cmd->add_option("--restarts", fit_restarts,
                      "Seeded restarts; clean-decision fits preferred, then best objective")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--out-model", fit_out_model, "Output model JSON path");
  fit_cmd->add_option("--out-trace", fit_out_trace, "Output iteration trace TSV path");
  fit_cmd->add_option("--out-predictions", fit_out_pred, "Output predictions CSV path");

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "Write predicted labels from a saved model");
  std::string pred_model, pred_out = "predictions.csv";
  pred_cmd->add_option("--model", pred_model, "Model JSON from fit")->required();
  pred_cmd->add_option("--out", pred_out, "Output predictions CSV path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score prediction files against ground truth");
  std::string eval_truth, eval_out_json;
  std::vector<std::string> eval_preds;
  eval_cmd->add_option("--truth", eval_truth, "Ground-truth JSON")->required();
  eval_cmd->add_option("--pred", eval_preds, "name=path; repeat a name for replicates")
      ->required();
  eval_cmd->add_option("--out-json", eval_out_json, "Optional JSON report path");

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Two-stage hyperparameter search");
  std::string tune_labels, tune_out_json = "tuning.json", tune_out_tsv, tune_init = "ds";
  ModelConfig tune_base;
  TuningGrid grid;
  grid.group_counts = {2, 3, 4, 5, 6};
  grid.lambdas = {0.001, 0.01, 0.1, 0.5, 1.0};
  grid.dims = {2, 3, 4, 5};
  tune_cmd->add_option("--labels", tune_labels, "Input label CSV")->required();
  tune_cmd->add_option("--group-grid", grid.group_counts, "Candidate worker group counts")
      ->delimiter(',');
  tune_cmd->add_option("--lambda-grid", grid.lambdas, "Candidate penalty weights")
      ->delimiter(',');
  tune_cmd->add_option("--dim-grid", grid.dims, "Candidate latent dimensions")
      ->delimiter(',');
  tune_cmd->add_option("--reps", grid.replications, "Fits per cell, best objective kept")
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--seed", grid.seed, "Master seed for the search");
  tune_cmd->add_option("--eta", tune_base.eta, "Rotation step size");
  tune_cmd->add_option("--tol", tune_base.tol, "Convergence tolerance");
  tune_cmd->add_option("--max-outer", tune_base.max_outer, "Maximum outer iterations");
  tune_cmd->add_option("--max-inner", tune_base.max_inner, "Gradient steps per factor block");
  tune_cmd->add_option("--init", tune_init, "Initialization scheme: random, mv, or ds")
      ->check(CLI::IsMember({"random", "mv", "ds"}));
  tune_cmd->add_option("--out-json", tune_out_json, "Output report JSON path");
  tune_cmd->add_option("--out-tsv", tune_out_tsv, "Output per-cell TSV path");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Generate-fit-score loop over replications");
  std::string bench_scenario, bench_methods = "proposed,mv,ds", bench_out_json;
  std::string bench_init = "ds";
  int bench_reps = 10, bench_restarts = 1;
  uint64_t bench_seed = 0;
  ModelConfig bench_config;
  bench_cmd->add_option("--scenario", bench_scenario, "Built-in scenario name")->required();
  bench_cmd->add_option("--reps", bench_reps, "Replications")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--methods", bench_methods, "Comma list: proposed,mv,ds");
  add_config_flags(bench_cmd, bench_config, bench_init);
  bench_cmd->add_option("--restarts", bench_restarts, "Seeded restarts per proposed fit")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--bench-seed", bench_seed, "Master seed for data and fits");
  bench_cmd->add_option("--out-json", bench_out_json, "Output report JSON path");

  // convert
  auto* conv_cmd = app.add_subcommand("convert", "Map a raw string-id CSV to dense ids");
  std::string conv_raw, conv_truth, conv_out_labels = "labels.csv", conv_out_truth,
                        conv_out_map = "idmap.json";
  conv_cmd->add_option("--raw", conv_raw, "Raw CSV with header and three string columns")
      ->required();
  conv_cmd->add_option("--truth", conv_truth, "Optional raw truth CSV 'task,label'");
  conv_cmd->add_option("--out-labels", conv_out_labels, "Output canonical label CSV");
  conv_cmd->add_option("--out-truth", conv_out_truth, "Output truth JSON (needs --truth)");
  conv_cmd->add_option("--out-map", conv_out_map, "Output id-mapping JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!kernels_override.empty()) {
      if (kernels_override == "avx2" && !kernels::avx2_available()) {
        std::fprintf(stderr, "error: the avx2 backend is not available on this machine\n");
        return kExitUsage;
      }
      kernels::set_backend(kernels_override == "avx2" ? kernels::Backend::kAvx2
                                                      : kernels::Backend::kScalar);
    }
    if (sim->parsed()) {
      if (sim_list) {
        for (const std::string& s : builtin_scenario_names()) std::printf("%s\n", s.c_str());
        return kExitOk;
      }
      if (sim_scenario.empty() == sim_spec.empty()) {
        std::fprintf(stderr, "error: simulate needs exactly one of --scenario or --spec\n");
        return kExitUsage;
      }
      if (!sim_scenario.empty() && !scenario_known(sim_scenario)) {
        return kExitUsage;
      }
      return cmd_simulate(sim_scenario, sim_spec, sim_seed, sim_out_labels, sim_out_truth);
    }
    if (fit_cmd->parsed()) {
      return cmd_fit(fit_labels, fit_config, fit_init, fit_restarts, fit_out_model,
                     fit_out_trace, fit_out_pred);
    }
    if (pred_cmd->parsed()) return cmd_predict(pred_model, pred_out);
    if (eval_cmd->parsed()) return cmd_eval(eval_truth, eval_preds, eval_out_json);
    if (tune_cmd->parsed()) {
      return cmd_tune(tune_labels, tune_base, tune_init, grid, tune_out_json, tune_out_tsv);
    }
    if (bench_cmd->parsed()) {
      if (!scenario_known(bench_scenario)) return kExitUsage;
      return cmd_bench(bench_scenario, bench_reps, bench_methods, bench_config, bench_init,
                       bench_restarts, bench_seed, bench_out_json);
    }
    if (conv_cmd->parsed()) {
      return cmd_convert(conv_raw, conv_truth, conv_out_labels, conv_out_truth, conv_out_map);
    }
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return kExitData;
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace crowdlf
