#pragma once

#include <string>
#include <vector>

#include "crowdlf/objective.hpp"
#include "crowdlf/types.hpp"

namespace crowdlf {

struct TraceRow {
  int iteration = 0;  // 1-based outer iteration
  double nll = 0.0;
  double penalty = 0.0;
  double total = 0.0;
  int task_changes = 0;    // membership changes applied this iteration
  int worker_changes = 0;
};

struct FitState {
  FactorSet factors;
  RotationSet rotations;
  Memberships memberships;
  std::vector<TraceRow> trace;
  double initial_loss = 0.0;  // penalized loss right after initialization
  bool converged = false;
  int iterations = 0;
  int worker_reassign_rejected = 0;  // individual worker moves dropped by the descent filter
  std::vector<std::string> warnings;
};

// Initial state per the configured scheme. Task groups come from the scheme
// (uniform random, majority vote, or the Dawid-Skene estimate); worker groups
// from D-quantile buckets of each worker's agreement with the initial task
// groups. Informative schemes draw factors around per-group random unit-mean
// Gaussians and start rotations at the identity; the random scheme draws
// standard-normal factors and random orthogonal rotations (category 0 pinned).
FitState initialize(const LabelMatrix& labels, const ModelConfig& config);

// One pass of block gradient descent: task factors, then worker factors.
// Each block takes up to config.max_inner steps with backtracking line search
// (initial step 0.1, halved up to 30 times, Armijo 1e-4); a stalled search
// leaves the block unchanged and records a warning. Never increases the
// penalized loss.
void update_factors(const LabelMatrix& labels, const ModelConfig& config, FitState& state);

// Cayley transform of every non-identity rotation: with skew S = G O' - O G',
// O <- (I + eta/2 S)^{-1} (I - eta/2 S) O. Orthogonality is preserved to
// rounding. eta is halved (up to 10 times) if the solve is numerically
// singular; the previous matrix is kept if that fails.
RotationSet cayley_step(const RotationSet& rotations, const std::vector<double>& rotation_grads,
                        double eta);

// Warm-started Lloyd's K-means reassignment: task groups on task-factor rows
// (num_task_groups clusters), worker groups on worker-factor rows. Ties go to
// the lowest cluster index; an emptied cluster is reseeded with the point
// farthest from its assigned centroid; stops on assignment stability or 50
// sweeps. Pure K-means: fit() filters the worker side afterwards.
Memberships update_memberships(const FactorSet& factors, const Memberships& current,
                               int num_task_groups, int num_worker_groups);

// Alternating minimization of the penalized loss: factor blocks, rotation
// step, membership step, until |delta total| <= config.tol or max_outer.
// The recorded per-iteration total never increases: the rotation step keeps
// the previous rotations unless the likelihood drops (halving eta to find a
// step), and each proposed worker-group move is accepted only if its own
// likelihood-plus-penalty change is non-positive (exact, since per-entry
// likelihood terms are separable over workers).
FitState fit(const LabelMatrix& labels, const ModelConfig& config);

}  // namespace crowdlf
