#pragma once

#include <span>
#include <vector>

#include "crowdlf/types.hpp"

namespace crowdlf {

// Categorical distribution over the label categories for one (task, worker)
// pair. Entries are strictly positive and sum to one within 1e-12.
struct ProbabilityRow {
  std::vector<double> p;
};

struct GradientBundle {
  Matrix task;                    // m x k
  Matrix worker;                  // n x k
  std::vector<double> rotations;  // RotationSet::data layout; category 0 stays zero
};

// Softmax over the per-category logits a' O_c b for one pair, with O_0 = I.
ProbabilityRow label_probabilities(std::span<const double> task_factor,
                                   std::span<const double> worker_factor,
                                   const RotationSet& rotations, int worker_group);

// Sum over observed entries of -log p(r_ij), probabilities floored at 1e-300.
double negative_log_likelihood(const LabelMatrix& labels, const FactorSet& factors,
                               const RotationSet& rotations, const Memberships& memberships);

// lambda * (sum_i ||a_i - mean of i's group||^2 + sum_j ||b_j - mean of j's
// group||^2), group means taken over the current factors. Group counts are
// inferred from the membership labels; trailing empty groups contribute 0.
double grouping_penalty(const FactorSet& factors, const Memberships& memberships, double lambda);

double penalized_loss(const LabelMatrix& labels, const FactorSet& factors,
                      const RotationSet& rotations, const Memberships& memberships,
                      double lambda);

// Analytic gradients of the penalized loss with the membership blocks frozen.
// `fixed_projection` carries the group means the penalty differentiates
// against; passing compute_centroids of the current factors gives the exact
// gradient of the penalized loss. Rotation gradients for category 0 are
// identically zero (those matrices are pinned).
GradientBundle gradients(const LabelMatrix& labels, const FactorSet& factors,
                         const RotationSet& rotations, const Memberships& memberships,
                         double lambda, const Centroids& fixed_projection);

namespace detail {

// Reusable flat buffers for the fit hot path. entry_* are the label entries
// split into parallel arrays; `rotated` caches O_c^{(V_j)} b_j per (j, c).
struct Workspace {
  int num_categories = 0;
  int dim = 0;
  std::vector<int> entry_task, entry_worker, entry_label;
  std::vector<double> rotated;   // n * C * k
  std::vector<double> buf;       // |entries| * C scratch (logits, then weights)
  std::vector<double> shift;     // |entries| shifted logit of the observed label
  std::vector<double> accum;     // n * C * k scratch for gradient contractions
  std::vector<double> proj;      // max(m, n) * k projection scratch
};

void init_workspace(const LabelMatrix& labels, int dim, Workspace& ws);
void refresh_rotated(const Matrix& worker_factors, const RotationSet& rotations,
                     const std::vector<int>& worker_groups, Workspace& ws);

// Likelihood of the entries given task factors `a` (m x k flat) against the
// cached rotated worker factors.
double nll_cached(const LabelMatrix& labels, const double* task_factors, Workspace& ws);

constexpr int kGradTask = 1;
constexpr int kGradWorker = 2;
constexpr int kGradRotations = 4;

// Gradient of the penalized loss for the requested blocks; also returns the
// likelihood value at the evaluation point. Requires fresh `rotated`.
double gradients_cached(const LabelMatrix& labels, const FactorSet& factors,
                        const RotationSet& rotations, const Memberships& memberships,
                        double lambda, const Centroids& fixed_projection, int blocks,
                        GradientBundle& out, Workspace& ws);

// Penalty restricted to one side (task rows or worker rows), group means
// recomputed from the given rows.
double penalty_side(const Matrix& rows, const std::vector<int>& groups, double lambda);

}  // namespace detail

}  // namespace crowdlf
