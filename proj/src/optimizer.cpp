#include "crowdlf/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "crowdlf/baselines.hpp"
#include "crowdlf/kernels.hpp"
#include "crowdlf/rng.hpp"

namespace crowdlf {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr uint64_t kTagTaskInit = 11;
constexpr uint64_t kTagTaskMean = 12;
constexpr uint64_t kTagWorkerMean = 13;
constexpr uint64_t kTagTaskFactor = 14;
constexpr uint64_t kTagWorkerFactor = 15;
constexpr uint64_t kTagRotation = 16;

constexpr double kArmijo = 1e-4;
constexpr double kInitialStep = 0.1;
constexpr double kMaxStep = 1e6;
constexpr int kMaxHalvings = 30;
constexpr double kDescentSlack = 1e-12;


// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the sign of
// the R diagonal fixed.
// `count` unit-length mean vectors drawn as rows of a Haar-random orthogonal
// matrix (each row is marginally uniform on the sphere). Joint orthogonality
// keeps the group means well separated, so no two groups start on top of each
// other; beyond k means the rows repeat with flipped sign (antipodal points).
std::vector<std::vector<double>> orthonormal_means(Rng& rng, int count, int k);

void random_orthogonal(Rng& rng, int k, double* out) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(k, k);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) g(r, c) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR();
  for (int c = 0; c < k; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  for (int rr = 0; rr < k; ++rr) {
    for (int cc = 0; cc < k; ++cc) out[static_cast<size_t>(rr) * k + cc] = q(rr, cc);
  }
}

std::vector<std::vector<double>> orthonormal_means(Rng& rng, int count, int k) {
  std::vector<double> q(static_cast<size_t>(k) * k);
  random_orthogonal(rng, k, q.data());
  std::vector<std::vector<double>> means(static_cast<size_t>(count));
  for (int g = 0; g < count; ++g) {
    const double sign = (g / k) % 2 == 0 ? 1.0 : -1.0;
    const double* row = q.data() + static_cast<size_t>(g % k) * k;
    means[static_cast<size_t>(g)].resize(static_cast<size_t>(k));
    for (int x = 0; x < k; ++x) means[static_cast<size_t>(g)][static_cast<size_t>(x)] = sign * row[x];
  }
  return means;
}

// Bucket t covers accuracies up to the t/D empirical quantile; the top bucket
// is open-ended. Many tied accuracies can leave some buckets empty.
std::vector<int> quantile_buckets(const std::vector<double>& acc, int buckets) {
  const int n = static_cast<int>(acc.size());
  std::vector<int> out(acc.size(), 0);
  if (buckets <= 1 || n == 0) return out;
  std::vector<double> sorted = acc;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> thresholds(buckets - 1);
  for (int t = 1; t < buckets; ++t) {
    const long idx = (static_cast<long>(t) * n + buckets - 1) / buckets - 1;  // ceil(t*n/D) - 1
    thresholds[t - 1] = sorted[std::clamp<long>(idx, 0, n - 1)];
  }
  for (int j = 0; j < n; ++j) {
    int b = buckets - 1;
    for (int t = 0; t < buckets - 1; ++t) {
      if (acc[j] <= thresholds[t]) {
        b = t;
        break;
      }
    }
    out[j] = b;
  }
  return out;
}

void add_warning(FitState& state, const std::string& msg) {
  for (const std::string& w : state.warnings) {
    if (w == msg) return;
  }
  state.warnings.push_back(msg);
}

// Likelihood contribution of one worker's observed labels when that worker is
// bound to `group`'s rotation set, everything else held fixed. The total
// likelihood is a sum of per-entry terms and each entry touches exactly one
// worker, so summing these per-worker values over a set of reassigned workers
// gives the exact change of the full likelihood.
double worker_nll_under(const LabelMatrix& labels, const FactorSet& factors,
                        const RotationSet& rotations, const int* entry_ids, int count, int worker,
                        int group, std::vector<double>& rot_buf) {
  const int C = labels.num_categories;
  const int k = factors.dim();
  const auto& ops = kernels::active();
  const std::span<const double> b = factors.worker_factors.row(worker);
  rot_buf.resize(static_cast<size_t>(C) * k);
  for (int c = 0; c < C; ++c) {
    const double* rot = rotations.matrix(group, c);
    for (int r = 0; r < k; ++r) {
      rot_buf[static_cast<size_t>(c) * k + r] =
          ops.dot(rot + static_cast<size_t>(r) * k, b.data(), static_cast<size_t>(k));
    }
  }
  double nll = 0.0;
  std::vector<double> logits(static_cast<size_t>(C));
  for (int e = 0; e < count; ++e) {
    const LabelEntry& entry = labels.entries[static_cast<size_t>(entry_ids[e])];
    const std::span<const double> a = factors.task_factors.row(entry.task);
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      logits[static_cast<size_t>(c)] =
          ops.dot(a.data(), rot_buf.data() + static_cast<size_t>(c) * k, static_cast<size_t>(k));
      mx = std::max(mx, logits[static_cast<size_t>(c)]);
    }
    double sum = 0.0;
    for (int c = 0; c < C; ++c) sum += std::exp(logits[static_cast<size_t>(c)] - mx);
    nll += std::log(sum) + mx - logits[static_cast<size_t>(entry.label)];
  }
  return nll;
}

// One factor block (task or worker side): up to max_inner gradient steps,
// each accepted through backtracking line search on likelihood + this side's
// penalty. The search warm-starts each step at twice the previously accepted
// step (first trial 0.1), so repeated steps approach the block minimizer
// instead of crawling at a fixed rate; Armijo acceptance still guarantees
// descent. Worker-side candidates re-rotate the cached worker factors; on
// exit the cache matches the accepted state.
void factor_block(const LabelMatrix& labels, const ModelConfig& config, bool task_side,
                  FitState& state, detail::Workspace& ws) {
  const int C = labels.num_categories;
  const int D = config.num_worker_groups;
  Matrix& rows = task_side ? state.factors.task_factors : state.factors.worker_factors;
  const std::vector<int>& groups =
      task_side ? state.memberships.task_groups : state.memberships.worker_groups;
  const size_t len = rows.data.size();
  const auto& ops = kernels::active();

  GradientBundle g;
  Matrix cand(rows.rows, rows.cols);
  double warm = kInitialStep;
  for (int inner = 0; inner < config.max_inner; ++inner) {
    const Centroids cent = compute_centroids(state.factors, state.memberships, C, D);
    const double nll0 = detail::gradients_cached(
        labels, state.factors, state.rotations, state.memberships, config.lambda, cent,
        task_side ? detail::kGradTask : detail::kGradWorker, g, ws);
    const Matrix& grad = task_side ? g.task : g.worker;
    const double gnorm2 = ops.dot(grad.data.data(), grad.data.data(), len);
    if (!(gnorm2 > 1e-24)) break;
    const double f0 = nll0 + detail::penalty_side(rows, groups, config.lambda);

    double step = warm;
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      cand.data = rows.data;
      ops.axpy(-step, grad.data.data(), cand.data.data(), len);
      double f;
      if (task_side) {
        f = detail::nll_cached(labels, cand.data.data(), ws);
      } else {
        detail::refresh_rotated(cand, state.rotations, state.memberships.worker_groups, ws);
        f = detail::nll_cached(labels, state.factors.task_factors.data.data(), ws);
      }
      f += detail::penalty_side(cand, groups, config.lambda);
      if (f <= f0 - kArmijo * step * gnorm2) {
        rows.data.swap(cand.data);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    warm = std::min(step * 2.0, kMaxStep);
    if (!accepted) {
      if (!task_side) {
        detail::refresh_rotated(rows, state.rotations, state.memberships.worker_groups, ws);
      }
      add_warning(state, task_side ? "line search stalled in the task-factor block"
                                   : "line search stalled in the worker-factor block");
      break;
    }
  }
}

// Lloyd's K-means on the rows of X, warm-started from `assign`. Ties go to
// the lowest cluster; an emptied cluster is reseeded with the point farthest
// from its assigned centroid (only from clusters that can spare a point).
void lloyd(const Matrix& X, int K, std::vector<int>& assign) {
  const int n = X.rows;
  const int k = X.cols;
  if (K <= 1 || n == 0) {
    std::fill(assign.begin(), assign.end(), 0);
    return;
  }
  Matrix cent(K, k);
  std::vector<int> cnt(K, 0);
  const auto& ops = kernels::active();

  auto recompute = [&] {
    std::fill(cent.data.begin(), cent.data.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (int i = 0; i < n; ++i) {
      ++cnt[assign[i]];
      const auto r = X.row(i);
      for (int x = 0; x < k; ++x) cent(assign[i], x) += r[x];
    }
    for (int g = 0; g < K; ++g) {
      if (cnt[g] > 0) {
        for (int x = 0; x < k; ++x) cent(g, x) /= cnt[g];
      }
    }
  };

  auto reseed_empties = [&] {
    for (;;) {
      recompute();
      int empty = -1;
      for (int g = 0; g < K; ++g) {
        if (cnt[g] == 0) {
          empty = g;
          break;
        }
      }
      if (empty < 0) return;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (cnt[assign[i]] < 2) continue;
        const double d = ops.sq_dist(X.row(i).data(), cent.row(assign[i]).data(), k);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) return;  // fewer distinct points than clusters
      assign[far] = empty;
    }
  };

  reseed_empties();
  for (int sweep = 0; sweep < 50; ++sweep) {
    recompute();
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int g = 0; g < K; ++g) {
        if (cnt[g] == 0) continue;
        const double d = ops.sq_dist(X.row(i).data(), cent.row(g).data(), k);
        if (d < best_d) {
          best_d = d;
          best = g;
        }
      }
      if (best != assign[i]) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    reseed_empties();
  }
}

}  // namespace

FitState initialize(const LabelMatrix& labels, const ModelConfig& config) {
  const int m = labels.num_tasks;
  const int n = labels.num_workers;
  const int C = labels.num_categories;
  const int k = config.dim;
  const int D = config.num_worker_groups;

  FitState state;
  std::vector<int> u0(m, 0);
  switch (config.init) {
    case InitScheme::kRandom: {
      Rng rng(derive_seed(config.seed, kTagTaskInit, 0));
      std::uniform_int_distribution<int> pick(0, C - 1);
      for (int i = 0; i < m; ++i) u0[i] = pick(rng);
      break;
    }
    case InitScheme::kMajorityVote:
      u0 = majority_vote(labels);
      break;
    case InitScheme::kDawidSkene:
      u0 = dawid_skene(labels).hard_labels;
      break;
  }

  // Worker groups: D-quantile buckets of each worker's agreement with u0.
  std::vector<double> agree(n, 0.0), total(n, 0.0);
  for (const LabelEntry& e : labels.entries) {
    total[e.worker] += 1.0;
    if (e.label == u0[e.task]) agree[e.worker] += 1.0;
  }
  std::vector<double> acc(n, 0.0);
  for (int j = 0; j < n; ++j) acc[j] = total[j] > 0.0 ? agree[j] / total[j] : 0.0;
  std::vector<int> v0 = quantile_buckets(acc, D);

  state.memberships.task_groups = std::move(u0);
  state.memberships.worker_groups = std::move(v0);
  state.factors.task_factors = Matrix(m, k);
  state.factors.worker_factors = Matrix(n, k);
  state.rotations = RotationSet::identity(D, C, k);

  if (config.init == InitScheme::kRandom) {
    for (int i = 0; i < m; ++i) {
      Rng rng(derive_seed(config.seed, kTagTaskFactor, i));
      std::normal_distribution<double> gauss(0.0, 1.0);
      auto row = state.factors.task_factors.row(i);
      for (int x = 0; x < k; ++x) row[x] = gauss(rng);
    }
    for (int j = 0; j < n; ++j) {
      Rng rng(derive_seed(config.seed, kTagWorkerFactor, j));
      std::normal_distribution<double> gauss(0.0, 1.0);
      auto row = state.factors.worker_factors.row(j);
      for (int x = 0; x < k; ++x) row[x] = gauss(rng);
    }
    for (int d = 0; d < D; ++d) {
      for (int c = 1; c < C; ++c) {
        Rng rng(derive_seed(config.seed, kTagRotation, static_cast<uint64_t>(d) * C + c));
        random_orthogonal(rng, k, state.rotations.matrix(d, c));
      }
    }
  } else {
    Rng task_mean_rng(derive_seed(config.seed, kTagTaskMean, 0));
    const std::vector<std::vector<double>> task_means = orthonormal_means(task_mean_rng, C, k);
    Rng worker_mean_rng(derive_seed(config.seed, kTagWorkerMean, 0));
    const std::vector<std::vector<double>> worker_means = orthonormal_means(worker_mean_rng, D, k);
    for (int i = 0; i < m; ++i) {
      Rng rng(derive_seed(config.seed, kTagTaskFactor, i));
      std::normal_distribution<double> gauss(0.0, 1.0);
      const auto& mean = task_means[state.memberships.task_groups[i]];
      auto row = state.factors.task_factors.row(i);
      for (int x = 0; x < k; ++x) row[x] = mean[x] + gauss(rng);
    }
    for (int j = 0; j < n; ++j) {
      Rng rng(derive_seed(config.seed, kTagWorkerFactor, j));
      std::normal_distribution<double> gauss(0.0, 1.0);
      const auto& mean = worker_means[state.memberships.worker_groups[j]];
      auto row = state.factors.worker_factors.row(j);
      for (int x = 0; x < k; ++x) row[x] = mean[x] + gauss(rng);
    }
  }
  return state;
}

void update_factors(const LabelMatrix& labels, const ModelConfig& config, FitState& state) {
  detail::Workspace ws;
  detail::init_workspace(labels, config.dim, ws);
  detail::refresh_rotated(state.factors.worker_factors, state.rotations,
                          state.memberships.worker_groups, ws);
  factor_block(labels, config, true, state, ws);
  factor_block(labels, config, false, state, ws);
}

RotationSet cayley_step(const RotationSet& rotations, const std::vector<double>& rotation_grads,
                        double eta) {
  if (rotation_grads.size() != rotations.data.size()) {
    throw std::invalid_argument("rotation gradient layout does not match the rotation set");
  }
  RotationSet out = rotations;
  const int k = rotations.dim;
  const RowMat eye = RowMat::Identity(k, k);
  for (int d = 0; d < rotations.num_groups; ++d) {
    for (int c = 1; c < rotations.num_categories; ++c) {
      const size_t off =
          (static_cast<size_t>(d) * rotations.num_categories + c) * static_cast<size_t>(k) * k;
      Eigen::Map<const RowMat> grad(rotation_grads.data() + off, k, k);
      Eigen::Map<const RowMat> o(rotations.matrix(d, c), k, k);
      const RowMat skew = grad * o.transpose() - o * grad.transpose();
      double step = eta;
      for (int attempt = 0; attempt <= 10; ++attempt) {
        Eigen::FullPivLU<RowMat> lu(eye + (0.5 * step) * skew);
        if (lu.isInvertible()) {
          const RowMat fresh = lu.solve((eye - (0.5 * step) * skew) * o);
          std::memcpy(out.matrix(d, c), fresh.data(), sizeof(double) * k * k);
          break;
        }
        step *= 0.5;
      }
    }
  }
  return out;
}

Memberships update_memberships(const FactorSet& factors, const Memberships& current,
                               int num_task_groups, int num_worker_groups) {
  Memberships next = current;
  lloyd(factors.task_factors, num_task_groups, next.task_groups);
  lloyd(factors.worker_factors, num_worker_groups, next.worker_groups);
  return next;
}

FitState fit(const LabelMatrix& labels, const ModelConfig& config) {
  {
    const ValidationReport rep = validate(config, labels);
    if (!rep.ok) {
      std::string msg = "invalid fit input:";
      for (const std::string& p : rep.problems) msg += " " + p + ";";
      throw std::invalid_argument(msg);
    }
  }
  const int C = labels.num_categories;
  const int D = config.num_worker_groups;

  FitState state = initialize(labels, config);
  detail::Workspace ws;
  detail::init_workspace(labels, config.dim, ws);
  detail::refresh_rotated(state.factors.worker_factors, state.rotations,
                          state.memberships.worker_groups, ws);

  double nll = detail::nll_cached(labels, state.factors.task_factors.data.data(), ws);
  double penalty = grouping_penalty(state.factors, state.memberships, config.lambda);
  state.initial_loss = nll + penalty;
  double prev_total = state.initial_loss;

  // Entries grouped by worker (CSR layout) for the membership filter below.
  const int n = labels.num_workers;
  std::vector<int> worker_entry_offsets(static_cast<size_t>(n) + 1, 0);
  std::vector<int> worker_entry_ids(labels.entries.size());
  for (const LabelEntry& e : labels.entries) ++worker_entry_offsets[static_cast<size_t>(e.worker) + 1];
  for (int j = 0; j < n; ++j) {
    worker_entry_offsets[static_cast<size_t>(j) + 1] += worker_entry_offsets[static_cast<size_t>(j)];
  }
  {
    std::vector<int> cursor(worker_entry_offsets.begin(), worker_entry_offsets.end() - 1);
    for (size_t e = 0; e < labels.entries.size(); ++e) {
      worker_entry_ids[static_cast<size_t>(cursor[static_cast<size_t>(labels.entries[e].worker)]++)] =
          static_cast<int>(e);
    }
  }
  std::vector<double> rot_buf;

  GradientBundle g;
  for (int it = 1; it <= config.max_outer; ++it) {
    factor_block(labels, config, true, state, ws);
    factor_block(labels, config, false, state, ws);

    // Rotation step: Cayley transform, eta halved until the likelihood does
    // not increase; otherwise the rotations stay put.
    const Centroids cent = compute_centroids(state.factors, state.memberships, C, D);
    const double nll_before = detail::gradients_cached(labels, state.factors, state.rotations,
                                                       state.memberships, config.lambda, cent,
                                                       detail::kGradRotations, g, ws);
    nll = nll_before;
    double step = config.eta;
    bool rotated = false;
    for (int attempt = 0; attempt <= 10 && !rotated; ++attempt) {
      const RotationSet cand = cayley_step(state.rotations, g.rotations, step);
      detail::refresh_rotated(state.factors.worker_factors, cand,
                              state.memberships.worker_groups, ws);
      const double nll_cand =
          detail::nll_cached(labels, state.factors.task_factors.data.data(), ws);
      if (nll_cand <= nll_before + kDescentSlack) {
        state.rotations = cand;
        nll = nll_cand;
        rotated = true;
      } else {
        step *= 0.5;
      }
    }
    if (!rotated) {
      detail::refresh_rotated(state.factors.worker_factors, state.rotations,
                              state.memberships.worker_groups, ws);
      add_warning(state, "rotation step found no descent direction; rotations kept");
    }
    if (rotation_orthogonality_error(state.rotations) > 1e-8) {
      add_warning(state, "rotation orthogonality drift above 1e-8");
    }

    // Membership step. The task side only moves the penalty down (the
    // likelihood never reads task groups), so it is applied as-is. A worker's
    // group also selects its rotation set, so each proposed worker move is
    // accepted only when its own likelihood-plus-penalty change is
    // non-positive. Per-entry likelihood terms touch exactly one worker each,
    // which makes those per-worker deltas add up to the exact total change;
    // the penalty side is measured against the current centroids, an upper
    // bound once centroids are recomputed as the new group means. Together
    // they keep the recorded trace non-increasing while still letting workers
    // migrate between groups.
    const Memberships proposal = update_memberships(state.factors, state.memberships, C, D);
    int task_changes = 0;
    for (size_t i = 0; i < proposal.task_groups.size(); ++i) {
      task_changes += proposal.task_groups[i] != state.memberships.task_groups[i];
    }
    state.memberships.task_groups = proposal.task_groups;

    int worker_changes = 0;
    const Centroids frozen = compute_centroids(state.factors, state.memberships, C, D);
    const auto& ops = kernels::active();
    const int k = config.dim;
    for (size_t j = 0; j < proposal.worker_groups.size(); ++j) {
      const int d_old = state.memberships.worker_groups[j];
      const int d_new = proposal.worker_groups[j];
      if (d_new == d_old) continue;
      const int* ids = worker_entry_ids.data() + worker_entry_offsets[j];
      const int count = worker_entry_offsets[j + 1] - worker_entry_offsets[j];
      const int wj = static_cast<int>(j);
      const double nll_old = worker_nll_under(labels, state.factors, state.rotations, ids, count,
                                              wj, d_old, rot_buf);
      const double nll_new = worker_nll_under(labels, state.factors, state.rotations, ids, count,
                                              wj, d_new, rot_buf);
      const std::span<const double> b = state.factors.worker_factors.row(wj);
      const double pen_old = ops.sq_dist(b.data(), frozen.worker_centroids.row(d_old).data(),
                                         static_cast<size_t>(k));
      const double pen_new = ops.sq_dist(b.data(), frozen.worker_centroids.row(d_new).data(),
                                         static_cast<size_t>(k));
      const double delta = (nll_new - nll_old) + config.lambda * (pen_new - pen_old);
      if (delta <= 0.0) {
        state.memberships.worker_groups[j] = d_new;
        ++worker_changes;
      } else {
        ++state.worker_reassign_rejected;
      }
    }
    if (worker_changes > 0) {
      detail::refresh_rotated(state.factors.worker_factors, state.rotations,
                              state.memberships.worker_groups, ws);
      nll = detail::nll_cached(labels, state.factors.task_factors.data.data(), ws);
    }
    penalty = grouping_penalty(state.factors, state.memberships, config.lambda);

    const double total = nll + penalty;
    state.trace.push_back({it, nll, penalty, total, task_changes, worker_changes});
    state.iterations = it;
    if (std::fabs(prev_total - total) <= config.tol) {
      state.converged = true;
      break;
    }
    prev_total = total;
  }
  return state;
}

}  // namespace crowdlf
