#include "crowdlf/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "crowdlf/rng.hpp"

namespace crowdlf {

namespace {

constexpr uint64_t kTagSimTaskFactor = 31;
constexpr uint64_t kTagSimWorkerFactor = 32;
constexpr uint64_t kTagSimLabel = 33;
constexpr uint64_t kTagSimMask = 34;
constexpr uint64_t kTagSimRepairTask = 35;
constexpr uint64_t kTagSimRepairWorker = 36;

// Entities 0..n-1 split into `groups` contiguous blocks, the remainder going
// to the earlier groups (150/3 -> 50+50+50; 10/3 -> 4+3+3).
std::vector<int> block_assignment(int n, int groups) {
  std::vector<int> out(n, 0);
  const int base = n / groups;
  const int rem = n % groups;
  int next = 0;
  for (int g = 0; g < groups; ++g) {
    const int count = base + (g < rem ? 1 : 0);
    for (int x = 0; x < count && next < n; ++x) out[next++] = g;
  }
  return out;
}

void check_spec(const ScenarioSpec& spec) {
  if (spec.num_tasks < 1 || spec.num_workers < 1 || spec.num_categories < 2 ||
      spec.num_worker_groups < 1 || spec.dim < 1) {
    throw std::invalid_argument("scenario: sizes must be positive (and >= 2 categories)");
  }
  if (spec.task_centroids.rows != spec.num_categories ||
      spec.task_centroids.cols != spec.dim) {
    throw std::invalid_argument("scenario: task centroid matrix must be C x k");
  }
  if (static_cast<int>(spec.worker_centroids.size()) != spec.num_worker_groups) {
    throw std::invalid_argument("scenario: need one worker centroid matrix per group");
  }
  for (const Matrix& w : spec.worker_centroids) {
    if (w.rows != spec.num_categories || w.cols != spec.dim) {
      throw std::invalid_argument("scenario: each worker centroid matrix must be C x k");
    }
  }
  if (!(spec.task_noise >= 0.0) || !(spec.worker_noise >= 0.0)) {
    throw std::invalid_argument("scenario: noise variances must be non-negative");
  }
  if (!(spec.missing_prob >= 0.0) || !(spec.missing_prob < 1.0)) {
    throw std::invalid_argument("scenario: missing probability must lie in [0, 1)");
  }
  if (spec.num_worker_groups > spec.num_workers || spec.num_categories > spec.num_tasks) {
    throw std::invalid_argument("scenario: more groups than entities");
  }
}

Matrix rows_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = static_cast<int>(rows.begin()->size());
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

SimulatedData generate(const ScenarioSpec& spec) {
  check_spec(spec);
  const int m = spec.num_tasks;
  const int n = spec.num_workers;
  const int C = spec.num_categories;
  const int k = spec.dim;

  SimulatedData out;
  GroundTruth& truth = out.truth;
  truth.task_labels = block_assignment(m, C);
  truth.memberships.task_groups = truth.task_labels;
  truth.memberships.worker_groups = block_assignment(n, spec.num_worker_groups);

  const double task_sd = std::sqrt(spec.task_noise);
  truth.task_factors = Matrix(m, k);
  for (int i = 0; i < m; ++i) {
    Rng rng(derive_seed(spec.seed, kTagSimTaskFactor, i));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto mean = spec.task_centroids.row(truth.task_labels[i]);
    auto row = truth.task_factors.row(i);
    for (int x = 0; x < k; ++x) row[x] = mean[x] + task_sd * gauss(rng);
  }

  const double worker_sd = std::sqrt(spec.worker_noise);
  truth.worker_factors.assign(C, Matrix(n, k));
  for (int j = 0; j < n; ++j) {
    Rng rng(derive_seed(spec.seed, kTagSimWorkerFactor, j));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Matrix& means = spec.worker_centroids[truth.memberships.worker_groups[j]];
    for (int c = 0; c < C; ++c) {
      const auto mean = means.row(c);
      auto row = truth.worker_factors[c].row(j);
      for (int x = 0; x < k; ++x) row[x] = mean[x] + worker_sd * gauss(rng);
    }
  }

  // Labels for every pair, from the softmax of per-category products.
  std::vector<int> full(static_cast<size_t>(m) * n, 0);
  std::vector<double> logits(C), probs(C);
  for (int i = 0; i < m; ++i) {
    Rng rng(derive_seed(spec.seed, kTagSimLabel, i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto a = truth.task_factors.row(i);
    for (int j = 0; j < n; ++j) {
      double mx = -1e300;
      for (int c = 0; c < C; ++c) {
        const auto b = truth.worker_factors[c].row(j);
        double s = 0.0;
        for (int x = 0; x < k; ++x) s += a[x] * b[x];
        logits[c] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (int c = 0; c < C; ++c) {
        probs[c] = std::exp(logits[c] - mx);
        z += probs[c];
      }
      const double u = unif(rng) * z;
      double acc = 0.0;
      int lab = C - 1;
      for (int c = 0; c < C; ++c) {
        acc += probs[c];
        if (u < acc) {
          lab = c;
          break;
        }
      }
      full[static_cast<size_t>(i) * n + j] = lab;
    }
  }

  // Missingness mask, with empty rows/columns repaired by redrawing only the
  // offending row or column of the mask.
  std::vector<uint8_t> keep(static_cast<size_t>(m) * n, 0);
  const double keep_prob = 1.0 - spec.missing_prob;
  for (int i = 0; i < m; ++i) {
    Rng rng(derive_seed(spec.seed, kTagSimMask, i));
    std::bernoulli_distribution coin(keep_prob);
    for (int j = 0; j < n; ++j) keep[static_cast<size_t>(i) * n + j] = coin(rng);
  }
  for (uint64_t attempt = 1;; ++attempt) {
    std::vector<int> row_count(m, 0), col_count(n, 0);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        if (keep[static_cast<size_t>(i) * n + j]) {
          ++row_count[i];
          ++col_count[j];
        }
      }
    }
    bool dirty = false;
    for (int i = 0; i < m; ++i) {
      if (row_count[i] > 0) continue;
      dirty = true;
      Rng rng(derive_seed(spec.seed, kTagSimRepairTask, static_cast<uint64_t>(i) * 65536 + attempt));
      std::bernoulli_distribution coin(keep_prob);
      for (int j = 0; j < n; ++j) keep[static_cast<size_t>(i) * n + j] = coin(rng);
    }
    for (int j = 0; j < n; ++j) {
      if (col_count[j] > 0) continue;
      dirty = true;
      Rng rng(derive_seed(spec.seed, kTagSimRepairWorker, static_cast<uint64_t>(j) * 65536 + attempt));
      std::bernoulli_distribution coin(keep_prob);
      for (int i = 0; i < m; ++i) keep[static_cast<size_t>(i) * n + j] = coin(rng);
    }
    if (!dirty) break;
  }

  out.labels.num_tasks = m;
  out.labels.num_workers = n;
  out.labels.num_categories = C;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      if (keep[static_cast<size_t>(i) * n + j]) {
        out.labels.entries.push_back({i, j, full[static_cast<size_t>(i) * n + j]});
      }
    }
  }
  return out;
}

std::vector<std::string> builtin_scenario_names() {
  return {"study1-hom", "study1-het", "study2-s1", "study2-s2", "study2-s3", "study2-s4"};
}

ScenarioSpec builtin_scenario(const std::string& name) {
  ScenarioSpec spec;
  spec.name = name;
  spec.num_categories = 3;
  spec.dim = 3;
  spec.task_centroids = rows_matrix({{2, 0, 0}, {0, 2, 0}, {0, 0, 2}});
  spec.worker_noise = 1.0;
  spec.missing_prob = 0.7;

  const Matrix wg1 = rows_matrix({{2, 0, 0}, {1, 1, 1}, {1, 1, 0}});
  const Matrix wg2 = rows_matrix({{0, 1, 1}, {0, 2, 0}, {1, 1, 0}});
  const Matrix wg3 = rows_matrix({{1, 1, 0}, {1, 1, 0}, {0, 0, 2}});
  const Matrix high = rows_matrix({{2, 0, 0}, {0, 2, 0}, {0, 0, 2}});
  const Matrix mid = rows_matrix({{2, 0, 0}, {0, 2, 1}, {0, 0, 2}});
  const Matrix low = rows_matrix({{1, 2, 0}, {0, 2, 1}, {1, 1, 1}});
  const Matrix low_alt = rows_matrix({{2, 0, 0}, {1, 0, 1}, {0, 2, 0}});

  if (name == "study1-hom" || name == "study1-het") {
    spec.num_tasks = 150;
    spec.num_workers = 150;
    spec.num_worker_groups = 3;
    spec.task_noise = name == "study1-hom" ? 0.5 : 2.0;
    spec.worker_centroids = {wg1, wg2, wg3};
    return spec;
  }
  spec.num_tasks = 150;
  spec.num_workers = 300;
  spec.task_noise = 0.5;
  if (name == "study2-s1") {
    spec.num_worker_groups = 2;
    spec.worker_centroids = {high, mid};
  } else if (name == "study2-s2") {
    spec.num_worker_groups = 2;
    spec.worker_centroids = {high, low};
  } else if (name == "study2-s3") {
    spec.num_worker_groups = 3;
    spec.worker_centroids = {high, mid, low};
  } else if (name == "study2-s4") {
    spec.num_worker_groups = 3;
    spec.worker_centroids = {high, low_alt, low};
  } else {
    std::string msg = "unknown scenario '" + name + "'; available:";
    for (const std::string& s : builtin_scenario_names()) msg += " " + s;
    throw std::invalid_argument(msg);
  }
  return spec;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("accuracy: prediction and truth lengths differ");
  }
  if (predicted.empty()) throw std::invalid_argument("accuracy: empty vectors");
  size_t hit = 0;
  for (size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

double membership_error(const std::vector<int>& estimated, const std::vector<int>& truth,
                        int num_groups) {
  if (estimated.size() != truth.size()) {
    throw std::invalid_argument("membership_error: lengths differ");
  }
  if (estimated.empty()) throw std::invalid_argument("membership_error: empty vectors");
  if (num_groups < 1 || num_groups > 8) {
    throw std::invalid_argument("membership_error: num_groups must be in [1, 8]");
  }
  for (size_t i = 0; i < estimated.size(); ++i) {
    if (estimated[i] < 0 || estimated[i] >= num_groups || truth[i] < 0 ||
        truth[i] >= num_groups) {
      throw std::invalid_argument("membership_error: group index out of range");
    }
  }
  // overlap[t][e] = #{ i : truth_i = t and estimated_i = e }
  std::vector<std::vector<size_t>> overlap(num_groups, std::vector<size_t>(num_groups, 0));
  for (size_t i = 0; i < estimated.size(); ++i) ++overlap[truth[i]][estimated[i]];

  std::vector<int> perm(num_groups);
  std::iota(perm.begin(), perm.end(), 0);
  size_t best = 0;
  do {
    size_t matched = 0;
    for (int g = 0; g < num_groups; ++g) matched += overlap[perm[g]][g];
    best = std::max(best, matched);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return 1.0 - static_cast<double>(best) / static_cast<double>(estimated.size());
}

}  // namespace crowdlf
