#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdlf/label_inference.hpp"
#include "crowdlf/model_selection.hpp"
#include "crowdlf/optimizer.hpp"
#include "crowdlf/simulation.hpp"

namespace crowdlf {

// Loaders collect line- or field-level diagnostics instead of throwing;
// `value` is set only when the file parsed and validated cleanly.
template <typename T>
struct Loaded {
  std::optional<T> value;
  std::vector<std::string> errors;
  bool ok() const { return value.has_value(); }
};

// labels.csv: header "task,worker,label", one observed entry per row, dense
// 0-based integer ids. Sizes are inferred from the maximum indices.
Loaded<LabelMatrix> load_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const LabelMatrix& labels);

// Scenario recipe as JSON (same object the truth file echoes).
Loaded<ScenarioSpec> load_scenario_json(const std::filesystem::path& path);
void write_scenario_json(const std::filesystem::path& path, const ScenarioSpec& spec);

// Ground truth: scenario echo, per-task labels, memberships, factors. Files
// produced elsewhere may carry labels only; memberships/factors are optional.
struct TruthFile {
  std::optional<ScenarioSpec> scenario;
  std::vector<int> task_labels;
  std::optional<Memberships> memberships;
};
Loaded<TruthFile> load_truth_json(const std::filesystem::path& path);
void write_truth_json(const std::filesystem::path& path, const ScenarioSpec& spec,
                      const GroundTruth& truth);
void write_truth_labels_json(const std::filesystem::path& path,
                             const std::vector<int>& task_labels);

// Model snapshot: config, data shape, factors, rotations (row-major),
// memberships, trace, and the stage-2 decision.
struct ModelFile {
  ModelConfig config;
  int num_tasks = 0;
  int num_workers = 0;
  int num_categories = 0;
  size_t num_observed = 0;
  FitState state;
  LabelDecision decision;
};
Loaded<ModelFile> load_model_json(const std::filesystem::path& path);
void write_model_json(const std::filesystem::path& path, const ModelConfig& config,
                      const LabelMatrix& labels, const FitState& state,
                      const LabelDecision& decision);

// Iteration trace: TSV with one row per outer iteration.
void write_trace_tsv(const std::filesystem::path& path, const FitState& state);

// predictions.csv: header "task,predicted_label".
Loaded<std::vector<int>> load_predictions_csv(const std::filesystem::path& path);
void write_predictions_csv(const std::filesystem::path& path, const std::vector<int>& labels);

void write_tuning_json(const std::filesystem::path& path, const TuningReport& report);
void write_tuning_tsv(const std::filesystem::path& path, const TuningReport& report);

// One-shot conversion of a raw CSV with arbitrary string ids/labels into the
// canonical dense format. Ids map to indices in sorted order; the mapping is
// written as JSON. An optional raw truth CSV ("task,label") is converted with
// the same mapping.
struct ConvertResult {
  LabelMatrix labels;
  std::vector<std::string> task_ids;    // index -> original id
  std::vector<std::string> worker_ids;
  std::vector<std::string> label_ids;
  std::vector<int> truth_labels;        // empty if no truth file given
};
Loaded<ConvertResult> convert_raw_csv(const std::filesystem::path& raw_path,
                                      const std::optional<std::filesystem::path>& raw_truth);
void write_id_map_json(const std::filesystem::path& path, const ConvertResult& result);

}  // namespace crowdlf
