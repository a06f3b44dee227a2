#pragma once

#include <string>
#include <vector>

#include "crowdlf/types.hpp"

namespace crowdlf {

// Generating recipe. Worker centroids are per group: worker_centroids[d] is a
// C x k matrix whose row c is the mean of that group's category-c factor.
struct ScenarioSpec {
  std::string name;
  int num_tasks = 0;
  int num_workers = 0;
  int num_categories = 0;
  int num_worker_groups = 0;
  int dim = 3;
  Matrix task_centroids;                 // C x k
  std::vector<Matrix> worker_centroids;  // D entries, each C x k
  double task_noise = 0.5;               // variance of task factors around their centroid
  double worker_noise = 1.0;             // variance of worker factors (1 in all builtins)
  double missing_prob = 0.7;             // each (task, worker) pair unobserved w.p. this
  uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<int> task_labels;         // true category of each task
  Memberships memberships;              // task groups = task_labels; worker groups as generated
  Matrix task_factors;                  // m x k generating factors
  std::vector<Matrix> worker_factors;   // per category c: n x k, row j = b_{j,c}
};

struct SimulatedData {
  LabelMatrix labels;
  GroundTruth truth;
};

// Draws factors around the scenario centroids (tasks and workers assigned to
// groups in equal blocks), samples one label per pair from the softmax of the
// per-category factor products, then keeps each pair with probability
// 1 - missing_prob. The missingness mask of a task or worker that ends up
// with no observations is redrawn until none is empty; factors and sampled
// labels are never redrawn. Fully determined by spec.seed.
SimulatedData generate(const ScenarioSpec& spec);

std::vector<std::string> builtin_scenario_names();
ScenarioSpec builtin_scenario(const std::string& name);

// Fraction of positions where predicted == truth; sizes must match.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

// Misclassification under the best group relabeling: min over permutations pi
// of (1/N) sum_g |{i : truth == pi(g)} \ {i : estimated == g}|. Exhaustive
// over permutations; num_groups > 8 is rejected.
double membership_error(const std::vector<int>& estimated, const std::vector<int>& truth,
                        int num_groups);

}  // namespace crowdlf
