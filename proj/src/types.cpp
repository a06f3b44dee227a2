#include "crowdlf/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace crowdlf {

RotationSet RotationSet::identity(int groups, int categories, int k) {
  RotationSet r;
  r.num_groups = groups;
  r.num_categories = categories;
  r.dim = k;
  r.data.assign(static_cast<size_t>(groups) * categories * k * k, 0.0);
  for (int d = 0; d < groups; ++d) {
    for (int c = 0; c < categories; ++c) {
      double* o = r.matrix(d, c);
      for (int i = 0; i < k; ++i) o[static_cast<size_t>(i) * k + i] = 1.0;
    }
  }
  return r;
}

double rotation_orthogonality_error(const RotationSet& rotations) {
  const int k = rotations.dim;
  double worst = 0.0;
  for (int d = 0; d < rotations.num_groups; ++d) {
    for (int c = 0; c < rotations.num_categories; ++c) {
      const double* o = rotations.matrix(d, c);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          double g = 0.0;  // (O'O)_{ij}: columns i and j
          for (int r = 0; r < k; ++r) {
            g += o[static_cast<size_t>(r) * k + i] * o[static_cast<size_t>(r) * k + j];
          }
          worst = std::max(worst, std::fabs(g - (i == j ? 1.0 : 0.0)));
        }
      }
    }
  }
  return worst;
}

const char* init_scheme_name(InitScheme s) {
  switch (s) {
    case InitScheme::kRandom: return "random";
    case InitScheme::kMajorityVote: return "mv";
    case InitScheme::kDawidSkene: return "ds";
  }
  return "ds";
}

bool parse_init_scheme(const std::string& name, InitScheme* out) {
  if (name == "random") { *out = InitScheme::kRandom; return true; }
  if (name == "mv") { *out = InitScheme::kMajorityVote; return true; }
  if (name == "ds") { *out = InitScheme::kDawidSkene; return true; }
  return false;
}

namespace {

void problem(ValidationReport& rep, const std::string& msg) {
  rep.ok = false;
  if (rep.problems.size() < 50) rep.problems.push_back(msg);
}

}  // namespace

ValidationReport validate(const LabelMatrix& labels) {
  ValidationReport rep;
  if (labels.num_tasks <= 0 || labels.num_workers <= 0 || labels.num_categories <= 0) {
    problem(rep, "empty data: tasks, workers and categories must all be positive");
    return rep;
  }
  if (labels.entries.empty()) {
    problem(rep, "no observed entries");
    return rep;
  }
  std::vector<int> task_count(labels.num_tasks, 0);
  std::vector<int> worker_count(labels.num_workers, 0);
  std::unordered_set<uint64_t> seen;
  seen.reserve(labels.entries.size() * 2);
  for (size_t e = 0; e < labels.entries.size(); ++e) {
    const LabelEntry& en = labels.entries[e];
    char msg[128];
    if (en.task < 0 || en.task >= labels.num_tasks) {
      std::snprintf(msg, sizeof(msg), "entry %zu: task index %d out of range [0, %d)", e, en.task,
                    labels.num_tasks);
      problem(rep, msg);
      continue;
    }
    if (en.worker < 0 || en.worker >= labels.num_workers) {
      std::snprintf(msg, sizeof(msg), "entry %zu: worker index %d out of range [0, %d)", e,
                    en.worker, labels.num_workers);
      problem(rep, msg);
      continue;
    }
    if (en.label < 0 || en.label >= labels.num_categories) {
      std::snprintf(msg, sizeof(msg), "entry %zu: label %d out of range [0, %d)", e, en.label,
                    labels.num_categories);
      problem(rep, msg);
      continue;
    }
    const uint64_t key =
        static_cast<uint64_t>(en.task) * static_cast<uint64_t>(labels.num_workers) + en.worker;
    if (!seen.insert(key).second) {
      std::snprintf(msg, sizeof(msg), "entry %zu: duplicate (task %d, worker %d)", e, en.task,
                    en.worker);
      problem(rep, msg);
      continue;
    }
    ++task_count[en.task];
    ++worker_count[en.worker];
  }
  for (int i = 0; i < labels.num_tasks; ++i) {
    if (task_count[i] == 0) {
      char msg[64];
      std::snprintf(msg, sizeof(msg), "task %d has no observed labels", i);
      problem(rep, msg);
    }
  }
  for (int j = 0; j < labels.num_workers; ++j) {
    if (worker_count[j] == 0) {
      char msg[64];
      std::snprintf(msg, sizeof(msg), "worker %d has no observed labels", j);
      problem(rep, msg);
    }
  }
  return rep;
}

ValidationReport validate(const ModelConfig& config, const LabelMatrix& labels) {
  ValidationReport rep = validate(labels);
  if (config.dim < 1) problem(rep, "dim must be >= 1");
  if (config.num_worker_groups < 1) problem(rep, "worker group count must be >= 1");
  if (!(config.lambda >= 0.0)) problem(rep, "lambda must be >= 0");
  if (!(config.eta > 0.0)) problem(rep, "eta must be > 0");
  if (!(config.tol > 0.0)) problem(rep, "tol must be > 0");
  if (config.max_outer < 1) problem(rep, "max_outer must be >= 1");
  if (config.max_inner < 1) problem(rep, "max_inner must be >= 1");
  if (labels.num_categories >= 2 && config.num_worker_groups > labels.num_workers) {
    problem(rep, "more worker groups than workers");
  }
  return rep;
}

Centroids compute_centroids(const FactorSet& factors, const Memberships& memberships,
                            int num_task_groups, int num_worker_groups) {
  const int k = factors.dim();
  Centroids out;
  out.task_centroids = Matrix(num_task_groups, k);
  out.worker_centroids = Matrix(num_worker_groups, k);
  out.task_group_empty.assign(num_task_groups, 0);
  out.worker_group_empty.assign(num_worker_groups, 0);

  std::vector<int> count(std::max(num_task_groups, num_worker_groups));

  std::fill(count.begin(), count.begin() + num_task_groups, 0);
  for (int i = 0; i < factors.task_factors.rows; ++i) {
    const int g = memberships.task_groups[i];
    ++count[g];
    const auto row = factors.task_factors.row(i);
    for (int x = 0; x < k; ++x) out.task_centroids(g, x) += row[x];
  }
  for (int g = 0; g < num_task_groups; ++g) {
    if (count[g] == 0) {
      out.task_group_empty[g] = 1;
    } else {
      for (int x = 0; x < k; ++x) out.task_centroids(g, x) /= count[g];
    }
  }

  std::fill(count.begin(), count.begin() + num_worker_groups, 0);
  for (int j = 0; j < factors.worker_factors.rows; ++j) {
    const int g = memberships.worker_groups[j];
    ++count[g];
    const auto row = factors.worker_factors.row(j);
    for (int x = 0; x < k; ++x) out.worker_centroids(g, x) += row[x];
  }
  for (int g = 0; g < num_worker_groups; ++g) {
    if (count[g] == 0) {
      out.worker_group_empty[g] = 1;
    } else {
      for (int x = 0; x < k; ++x) out.worker_centroids(g, x) /= count[g];
    }
  }
  return out;
}

}  // namespace crowdlf
