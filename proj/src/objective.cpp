#include "crowdlf/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "crowdlf/kernels.hpp"

namespace crowdlf {

namespace {

constexpr double kProbFloor = 1e-300;
const double kLossCap = -std::log(kProbFloor);

// theta_c for one pair, straight from the definition; used only by the
// per-pair public entry point. The batch path lives in the detail functions.
void pair_logits(std::span<const double> a, std::span<const double> b, const RotationSet& rot,
                 int group, double* logits) {
  const int C = rot.num_categories;
  const int k = rot.dim;
  double acc = 0.0;
  for (int x = 0; x < k; ++x) acc += a[x] * b[x];
  logits[0] = acc;
  for (int c = 1; c < C; ++c) {
    const double* o = rot.matrix(group, c);
    acc = 0.0;
    for (int r = 0; r < k; ++r) {
      double orb = 0.0;
      for (int x = 0; x < k; ++x) orb += o[static_cast<size_t>(r) * k + x] * b[x];
      acc += a[r] * orb;
    }
    logits[c] = acc;
  }
}

}  // namespace

ProbabilityRow label_probabilities(std::span<const double> task_factor,
                                   std::span<const double> worker_factor,
                                   const RotationSet& rotations, int worker_group) {
  const int C = rotations.num_categories;
  ProbabilityRow out;
  out.p.resize(C);
  pair_logits(task_factor, worker_factor, rotations, worker_group, out.p.data());
  double mx = out.p[0];
  for (int c = 1; c < C; ++c) mx = std::max(mx, out.p[c]);
  double s = 0.0;
  for (int c = 0; c < C; ++c) {
    out.p[c] = std::exp(out.p[c] - mx);
    s += out.p[c];
  }
  const double inv = 1.0 / s;
  for (int c = 0; c < C; ++c) out.p[c] = std::max(out.p[c] * inv, kProbFloor);
  return out;
}

namespace detail {

void init_workspace(const LabelMatrix& labels, int dim, Workspace& ws) {
  const size_t E = labels.entries.size();
  const int C = labels.num_categories;
  ws.num_categories = C;
  ws.dim = dim;
  ws.entry_task.resize(E);
  ws.entry_worker.resize(E);
  ws.entry_label.resize(E);
  for (size_t e = 0; e < E; ++e) {
    ws.entry_task[e] = labels.entries[e].task;
    ws.entry_worker[e] = labels.entries[e].worker;
    ws.entry_label[e] = labels.entries[e].label;
  }
  ws.rotated.assign(static_cast<size_t>(labels.num_workers) * C * dim, 0.0);
  ws.buf.assign(E * C, 0.0);
  ws.shift.assign(E, 0.0);
  ws.accum.assign(static_cast<size_t>(labels.num_workers) * C * dim, 0.0);
  ws.proj.assign(static_cast<size_t>(std::max(labels.num_tasks, labels.num_workers)) * dim, 0.0);
}

void refresh_rotated(const Matrix& worker_factors, const RotationSet& rotations,
                     const std::vector<int>& worker_groups, Workspace& ws) {
  const int C = ws.num_categories;
  const int k = ws.dim;
  const int n = worker_factors.rows;
  for (int j = 0; j < n; ++j) {
    const int d = worker_groups[j];
    const auto b = worker_factors.row(j);
    double* base = ws.rotated.data() + static_cast<size_t>(j) * C * k;
    for (int x = 0; x < k; ++x) base[x] = b[x];  // category 0: identity
    for (int c = 1; c < C; ++c) {
      const double* o = rotations.matrix(d, c);
      double* dst = base + static_cast<size_t>(c) * k;
      for (int r = 0; r < k; ++r) {
        double acc = 0.0;
        for (int x = 0; x < k; ++x) acc += o[static_cast<size_t>(r) * k + x] * b[x];
        dst[r] = acc;
      }
    }
  }
}

namespace {

// Shared forward pass over the entry batch: logits, stable softmax pieces,
// accumulated likelihood. With weights requested, ws.buf holds p_c - 1{r=c}
// on return; otherwise its contents are the exponentials (scratch).
double forward_pass(const LabelMatrix& labels, const double* task_factors, Workspace& ws,
                    bool weights) {
  const auto& ops = kernels::active();
  const size_t E = labels.entries.size();
  const int C = ws.num_categories;
  ops.entry_logits(task_factors, ws.rotated.data(), ws.entry_task.data(), ws.entry_worker.data(),
                   E, C, ws.dim, ws.buf.data());
  for (size_t e = 0; e < E; ++e) {
    double* row = ws.buf.data() + e * C;
    double mx = row[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    for (int c = 0; c < C; ++c) row[c] -= mx;
    ws.shift[e] = row[ws.entry_label[e]];
  }
  ops.exp_inplace(ws.buf.data(), E * C);
  double nll = 0.0;
  for (size_t e = 0; e < E; ++e) {
    double* row = ws.buf.data() + e * C;
    double s = row[0];
    for (int c = 1; c < C; ++c) s += row[c];
    const double loss = std::min(std::log(s) - ws.shift[e], kLossCap);
    nll += loss;
    if (weights) {
      const double inv = 1.0 / s;
      const int r = ws.entry_label[e];
      for (int c = 0; c < C; ++c) row[c] *= inv;
      row[r] -= 1.0;
    }
  }
  return nll;
}

}  // namespace

double nll_cached(const LabelMatrix& labels, const double* task_factors, Workspace& ws) {
  return forward_pass(labels, task_factors, ws, false);
}

double penalty_side(const Matrix& rows, const std::vector<int>& groups, double lambda) {
  if (lambda == 0.0 || rows.rows == 0) return 0.0;
  const int k = rows.cols;
  int num_groups = 0;
  for (int g : groups) num_groups = std::max(num_groups, g + 1);
  Matrix means(num_groups, k);
  std::vector<int> count(num_groups, 0);
  for (int i = 0; i < rows.rows; ++i) {
    const int g = groups[i];
    ++count[g];
    const auto r = rows.row(i);
    for (int x = 0; x < k; ++x) means(g, x) += r[x];
  }
  for (int g = 0; g < num_groups; ++g) {
    if (count[g] > 0) {
      for (int x = 0; x < k; ++x) means(g, x) /= count[g];
    }
  }
  std::vector<double> proj(static_cast<size_t>(rows.rows) * k);
  for (int i = 0; i < rows.rows; ++i) {
    std::memcpy(proj.data() + static_cast<size_t>(i) * k, means.row(groups[i]).data(),
                sizeof(double) * k);
  }
  return lambda *
         kernels::active().sq_dist(rows.data.data(), proj.data(), static_cast<size_t>(rows.rows) * k);
}

double gradients_cached(const LabelMatrix& labels, const FactorSet& factors,
                        const RotationSet& rotations, const Memberships& memberships,
                        double lambda, const Centroids& fixed_projection, int blocks,
                        GradientBundle& out, Workspace& ws) {
  const auto& ops = kernels::active();
  const size_t E = labels.entries.size();
  const int C = ws.num_categories;
  const int k = ws.dim;
  const int m = factors.task_factors.rows;
  const int n = factors.worker_factors.rows;

  const double nll = forward_pass(labels, factors.task_factors.data.data(), ws, true);

  if (blocks & kGradTask) {
    if (!out.task.same_shape(factors.task_factors)) out.task = Matrix(m, k);
    std::fill(out.task.data.begin(), out.task.data.end(), 0.0);
    for (size_t e = 0; e < E; ++e) {
      const double* w = ws.buf.data() + e * C;
      const double* rot = ws.rotated.data() + static_cast<size_t>(ws.entry_worker[e]) * C * k;
      double* g = out.task.row(ws.entry_task[e]).data();
      for (int c = 0; c < C; ++c) {
        const double wc = w[c];
        const double* t = rot + static_cast<size_t>(c) * k;
        for (int x = 0; x < k; ++x) g[x] += wc * t[x];
      }
    }
  }

  const bool need_worker = blocks & kGradWorker;
  const bool need_rot = blocks & kGradRotations;
  if (need_worker || need_rot) {
    std::fill(ws.accum.begin(), ws.accum.end(), 0.0);
    for (size_t e = 0; e < E; ++e) {
      const double* w = ws.buf.data() + e * C;
      const double* a = factors.task_factors.row(ws.entry_task[e]).data();
      double* acc = ws.accum.data() + static_cast<size_t>(ws.entry_worker[e]) * C * k;
      for (int c = 0; c < C; ++c) {
        const double wc = w[c];
        double* dst = acc + static_cast<size_t>(c) * k;
        for (int x = 0; x < k; ++x) dst[x] += wc * a[x];
      }
    }
    if (need_worker) {
      if (!out.worker.same_shape(factors.worker_factors)) out.worker = Matrix(n, k);
      std::fill(out.worker.data.begin(), out.worker.data.end(), 0.0);
    }
    if (need_rot) out.rotations.assign(rotations.data.size(), 0.0);
    for (int j = 0; j < n; ++j) {
      const int d = memberships.worker_groups[j];
      const double* acc = ws.accum.data() + static_cast<size_t>(j) * C * k;
      if (need_worker) {
        double* g = out.worker.row(j).data();
        for (int x = 0; x < k; ++x) g[x] += acc[x];  // category 0: O' = I
        for (int c = 1; c < C; ++c) {
          const double* o = rotations.matrix(d, c);
          const double* v = acc + static_cast<size_t>(c) * k;
          for (int x = 0; x < k; ++x) {
            double s = 0.0;
            for (int r = 0; r < k; ++r) s += o[static_cast<size_t>(r) * k + x] * v[r];
            g[x] += s;
          }
        }
      }
      if (need_rot) {
        const double* b = factors.worker_factors.row(j).data();
        for (int c = 1; c < C; ++c) {
          const double* v = acc + static_cast<size_t>(c) * k;
          double* go = out.rotations.data() + (static_cast<size_t>(d) * C + c) * k * k;
          for (int r = 0; r < k; ++r) {
            const double vr = v[r];
            for (int x = 0; x < k; ++x) go[static_cast<size_t>(r) * k + x] += vr * b[x];
          }
        }
      }
    }
  }

  if (lambda > 0.0) {
    if (blocks & kGradTask) {
      for (int i = 0; i < m; ++i) {
        std::memcpy(ws.proj.data() + static_cast<size_t>(i) * k,
                    fixed_projection.task_centroids.row(memberships.task_groups[i]).data(),
                    sizeof(double) * k);
      }
      ops.axpy(2.0 * lambda, factors.task_factors.data.data(), out.task.data.data(),
               static_cast<size_t>(m) * k);
      ops.axpy(-2.0 * lambda, ws.proj.data(), out.task.data.data(), static_cast<size_t>(m) * k);
    }
    if (need_worker) {
      for (int j = 0; j < n; ++j) {
        std::memcpy(ws.proj.data() + static_cast<size_t>(j) * k,
                    fixed_projection.worker_centroids.row(memberships.worker_groups[j]).data(),
                    sizeof(double) * k);
      }
      ops.axpy(2.0 * lambda, factors.worker_factors.data.data(), out.worker.data.data(),
               static_cast<size_t>(n) * k);
      ops.axpy(-2.0 * lambda, ws.proj.data(), out.worker.data.data(), static_cast<size_t>(n) * k);
    }
  }
  return nll;
}

}  // namespace detail

double negative_log_likelihood(const LabelMatrix& labels, const FactorSet& factors,
                               const RotationSet& rotations, const Memberships& memberships) {
  detail::Workspace ws;
  detail::init_workspace(labels, factors.dim(), ws);
  detail::refresh_rotated(factors.worker_factors, rotations, memberships.worker_groups, ws);
  return detail::nll_cached(labels, factors.task_factors.data.data(), ws);
}

double grouping_penalty(const FactorSet& factors, const Memberships& memberships, double lambda) {
  return detail::penalty_side(factors.task_factors, memberships.task_groups, lambda) +
         detail::penalty_side(factors.worker_factors, memberships.worker_groups, lambda);
}

double penalized_loss(const LabelMatrix& labels, const FactorSet& factors,
                      const RotationSet& rotations, const Memberships& memberships,
                      double lambda) {
  return negative_log_likelihood(labels, factors, rotations, memberships) +
         grouping_penalty(factors, memberships, lambda);
}

GradientBundle gradients(const LabelMatrix& labels, const FactorSet& factors,
                         const RotationSet& rotations, const Memberships& memberships,
                         double lambda, const Centroids& fixed_projection) {
  detail::Workspace ws;
  detail::init_workspace(labels, factors.dim(), ws);
  detail::refresh_rotated(factors.worker_factors, rotations, memberships.worker_groups, ws);
  GradientBundle out;
  out.rotations.assign(rotations.data.size(), 0.0);
  detail::gradients_cached(labels, factors, rotations, memberships, lambda, fixed_projection,
                           detail::kGradTask | detail::kGradWorker | detail::kGradRotations, out,
                           ws);
  return out;
}

}  // namespace crowdlf
