#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crowdlf/matrix.hpp"

namespace crowdlf {

// One observed label: `worker` assigned `label` to `task`.
struct LabelEntry {
  int task = 0;
  int worker = 0;
  int label = 0;
};

// Sparse label matrix over the observed set. Entries are kept sorted
// task-major (task, then worker); loaders and the generator preserve that
// order so every reduction downstream runs in one fixed order.
struct LabelMatrix {
  int num_tasks = 0;
  int num_workers = 0;
  int num_categories = 0;
  std::vector<LabelEntry> entries;
};

struct FactorSet {
  Matrix task_factors;    // m x k
  Matrix worker_factors;  // n x k
  int dim() const { return task_factors.cols; }
};

// Orthogonal per-category rotations for each worker group. `data` holds
// num_groups * num_categories matrices of size dim x dim, row-major, group
// major: matrix (d, c) starts at (d * num_categories + c) * dim * dim. The
// category-0 matrix of every group is pinned to the identity so the factor
// scale is identified.
struct RotationSet {
  int num_groups = 0;      // D
  int num_categories = 0;  // C
  int dim = 0;             // k
  std::vector<double> data;

  static RotationSet identity(int groups, int categories, int k);
  double* matrix(int group, int category) {
    return data.data() + (static_cast<size_t>(group) * num_categories + category) * dim * dim;
  }
  const double* matrix(int group, int category) const {
    return data.data() + (static_cast<size_t>(group) * num_categories + category) * dim * dim;
  }
};

// Worst orthogonality defect over all matrices: max |O'O - I| entrywise.
double rotation_orthogonality_error(const RotationSet& rotations);

// Zero-based group labels. Task groups play the role of label categories;
// worker groups index rotation sets. (The model writeup counts worker groups
// from 1; everything here is 0-based.)
struct Memberships {
  std::vector<int> task_groups;    // size m, values in [0, C)
  std::vector<int> worker_groups;  // size n, values in [0, D)
};

struct Centroids {
  Matrix task_centroids;                    // C x k
  Matrix worker_centroids;                  // D x k
  std::vector<uint8_t> task_group_empty;    // size C
  std::vector<uint8_t> worker_group_empty;  // size D
};

enum class InitScheme { kRandom, kMajorityVote, kDawidSkene };

const char* init_scheme_name(InitScheme s);
bool parse_init_scheme(const std::string& name, InitScheme* out);

struct ModelConfig {
  int dim = 3;                // k
  int num_worker_groups = 3;  // D
  double lambda = 0.1;        // grouping penalty weight
  double eta = 0.1;           // rotation step size
  double tol = 0.5;           // stop when |delta penalized loss| <= tol
  int max_outer = 100;
  int max_inner = 5;          // gradient steps per factor block
  InitScheme init = InitScheme::kDawidSkene;
  uint64_t seed = 0;
  // Kept for the command-line surface; the solver is single-threaded and
  // reproducible for a fixed seed either way.
  bool deterministic = true;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> problems;
};

// Structural checks on loaded or generated data: indices in range, at most
// one label per (task, worker) pair, no task or worker without observations.
ValidationReport validate(const LabelMatrix& labels);

// Config checks against a concrete data set (k >= 1, D >= 1, lambda >= 0,
// eta > 0, tol > 0, iteration caps positive).
ValidationReport validate(const ModelConfig& config, const LabelMatrix& labels);

// Group means of factor rows under the given memberships. An empty group
// yields a zero row plus a flag; callers decide whether that is an error.
Centroids compute_centroids(const FactorSet& factors, const Memberships& memberships,
                            int num_task_groups, int num_worker_groups);

}  // namespace crowdlf
