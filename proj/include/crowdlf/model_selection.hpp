#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdlf/optimizer.hpp"

namespace crowdlf {

// log(nll / n_obs) + (D + k - 1) * log(n_obs) / n_obs. Rejects nll <= 0 or
// n_obs == 0.
double bic(double fitted_nll, size_t num_observed, int num_worker_groups, int dim);

// Convenience overload on a finished fit.
double bic(const FitState& state, const LabelMatrix& labels);

// Agreement between the fitted most-probable labels and the observed labels,
// restricted to entries whose worker belongs to the group the stage-2
// decision picked for the task's category. Empty reference set -> nullopt.
std::optional<double> q_h(const LabelMatrix& labels, const FitState& state);

struct TuningGrid {
  std::vector<int> group_counts;  // D candidates
  std::vector<double> lambdas;
  std::vector<int> dims;          // k candidates
  int replications = 3;           // seeds per cell, best objective kept
  uint64_t seed = 0;
};

struct TuningCell {
  int D = 0;
  double lambda = 0.0;
  int k = 0;
  double objective = 0.0;            // best final penalized loss across replications
  double bic_value = 0.0;            // stage A only
  std::optional<double> qh;          // stage B only
  bool skipped = false;              // stage B cell with an empty reference set
};

struct TuningReport {
  std::vector<TuningCell> stage_a;
  std::vector<TuningCell> stage_b;
  int chosen_D = 0;
  double chosen_lambda = 0.0;
  int chosen_k = 0;
  ModelConfig chosen_config;
  std::vector<std::string> warnings;
};

// Two-stage hyperparameter search: stage A picks D by minimum BIC at the
// lower-median (lambda, k) of the candidate lists; stage B picks (lambda, k)
// at the chosen D by maximum Q_h. Ties prefer the smaller model: smaller D,
// then smaller k, then larger lambda.
TuningReport tune(const LabelMatrix& labels, const TuningGrid& grid, const ModelConfig& base);

namespace detail {
// Selection rules exposed for direct testing. Cells are examined in their
// stored order; stage A expects ascending D, stage B expects k ascending with
// lambda descending within each k.
int pick_stage_a(const std::vector<TuningCell>& cells);   // index of winner, -1 if empty
int pick_stage_b(const std::vector<TuningCell>& cells);   // index of winner, -1 if all skipped
}  // namespace detail

}  // namespace crowdlf
