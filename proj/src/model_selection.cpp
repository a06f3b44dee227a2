#include "crowdlf/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crowdlf/label_inference.hpp"
#include "crowdlf/objective.hpp"
#include "crowdlf/rng.hpp"

namespace crowdlf {

namespace {

constexpr uint64_t kTagTuneFit = 21;

// Lower median: for an even count the smaller of the two middle values.
template <typename T>
T lower_median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

struct CellFit {
  FitState state;
  double objective = 0.0;
};

CellFit fit_cell(const LabelMatrix& labels, const ModelConfig& base, uint64_t grid_seed,
                 size_t cell_index, int replications, std::vector<std::string>& warnings) {
  CellFit best;
  bool have = false;
  for (int rep = 0; rep < replications; ++rep) {
    ModelConfig config = base;
    config.seed = derive_seed(grid_seed, kTagTuneFit, cell_index * 1024 + rep);
    FitState state = fit(labels, config);
    const double objective =
        state.trace.empty() ? state.initial_loss : state.trace.back().total;
    if (!have || objective < best.objective) {
      best.state = std::move(state);
      best.objective = objective;
      have = true;
    }
  }
  for (const std::string& w : best.state.warnings) {
    bool dup = false;
    for (const std::string& seen : warnings) dup = dup || seen == w;
    if (!dup) warnings.push_back(w);
  }
  return best;
}

}  // namespace

double bic(double fitted_nll, size_t num_observed, int num_worker_groups, int dim) {
  if (num_observed == 0) throw std::domain_error("bic: no observed labels");
  if (!(fitted_nll > 0.0)) throw std::domain_error("bic: fitted loss must be positive");
  const double n = static_cast<double>(num_observed);
  return std::log(fitted_nll / n) +
         (num_worker_groups + dim - 1) * std::log(n) / n;
}

double bic(const FitState& state, const LabelMatrix& labels) {
  const double nll =
      negative_log_likelihood(labels, state.factors, state.rotations, state.memberships);
  return bic(nll, labels.entries.size(), state.rotations.num_groups, state.factors.dim());
}

std::optional<double> q_h(const LabelMatrix& labels, const FitState& state) {
  const int C = labels.num_categories;
  const int D = state.rotations.num_groups;
  const Centroids centroids = compute_centroids(state.factors, state.memberships, C, D);
  const AlignedCentroids aligned = align_centroids(centroids, state.rotations);
  const LabelDecision decision = decide_labels(centroids, aligned, state.memberships);
  const std::vector<int> fitted =
      predicted_label_fit(labels, state.factors, state.rotations, state.memberships);

  size_t in_set = 0, agree = 0;
  for (size_t e = 0; e < labels.entries.size(); ++e) {
    const LabelEntry& entry = labels.entries[e];
    const int g = state.memberships.task_groups[entry.task];
    if (state.memberships.worker_groups[entry.worker] != decision.category_source[g]) continue;
    ++in_set;
    agree += fitted[e] == entry.label;
  }
  if (in_set == 0) return std::nullopt;
  return static_cast<double>(agree) / static_cast<double>(in_set);
}

namespace detail {

int pick_stage_a(const std::vector<TuningCell>& cells) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    if (best < 0) {
      best = i;
      continue;
    }
    const TuningCell& c = cells[i];
    const TuningCell& b = cells[best];
    if (c.bic_value < b.bic_value ||
        (c.bic_value == b.bic_value && c.D < b.D)) {
      best = i;
    }
  }
  return best;
}

int pick_stage_b(const std::vector<TuningCell>& cells) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    const TuningCell& c = cells[i];
    if (c.skipped || !c.qh.has_value()) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const TuningCell& b = cells[best];
    if (*c.qh > *b.qh) {
      best = i;
    } else if (*c.qh == *b.qh) {
      if (c.k < b.k || (c.k == b.k && c.lambda > b.lambda)) best = i;
    }
  }
  return best;
}

}  // namespace detail

TuningReport tune(const LabelMatrix& labels, const TuningGrid& grid, const ModelConfig& base) {
  if (grid.group_counts.empty() || grid.lambdas.empty() || grid.dims.empty()) {
    throw std::invalid_argument("tune: empty candidate list in grid");
  }
  if (grid.replications < 1) throw std::invalid_argument("tune: replications must be >= 1");

  TuningReport report;
  const double lambda_a = lower_median(grid.lambdas);
  const int k_a = lower_median(grid.dims);

  std::vector<int> group_counts = grid.group_counts;
  std::sort(group_counts.begin(), group_counts.end());
  size_t cell_index = 0;
  for (int D : group_counts) {
    ModelConfig config = base;
    config.num_worker_groups = D;
    config.lambda = lambda_a;
    config.dim = k_a;
    const CellFit cell = fit_cell(labels, config, grid.seed, cell_index++, grid.replications,
                                  report.warnings);
    TuningCell row;
    row.D = D;
    row.lambda = lambda_a;
    row.k = k_a;
    row.objective = cell.objective;
    row.bic_value = bic(cell.state, labels);
    report.stage_a.push_back(row);
  }
  const int winner_a = detail::pick_stage_a(report.stage_a);
  report.chosen_D = report.stage_a[winner_a].D;

  std::vector<int> dims = grid.dims;
  std::sort(dims.begin(), dims.end());
  std::vector<double> lambdas = grid.lambdas;
  std::sort(lambdas.begin(), lambdas.end(), std::greater<double>());
  for (int k : dims) {
    for (double lambda : lambdas) {
      ModelConfig config = base;
      config.num_worker_groups = report.chosen_D;
      config.lambda = lambda;
      config.dim = k;
      const CellFit cell = fit_cell(labels, config, grid.seed, cell_index++, grid.replications,
                                    report.warnings);
      TuningCell row;
      row.D = report.chosen_D;
      row.lambda = lambda;
      row.k = k;
      row.objective = cell.objective;
      row.qh = q_h(labels, cell.state);
      row.skipped = !row.qh.has_value();
      if (row.skipped) {
        report.warnings.push_back("empty high-quality reference set for lambda=" +
                                  std::to_string(lambda) + " k=" + std::to_string(k) +
                                  "; cell skipped");
      }
      report.stage_b.push_back(row);
    }
  }
  int winner_b = detail::pick_stage_b(report.stage_b);
  if (winner_b < 0) {
    report.warnings.push_back(
        "every (lambda, k) cell had an empty reference set; falling back to the smallest model");
    winner_b = 0;
  }
  report.chosen_lambda = report.stage_b[winner_b].lambda;
  report.chosen_k = report.stage_b[winner_b].k;

  report.chosen_config = base;
  report.chosen_config.num_worker_groups = report.chosen_D;
  report.chosen_config.lambda = report.chosen_lambda;
  report.chosen_config.dim = report.chosen_k;
  return report;
}

}  // namespace crowdlf
