#include "crowdlf/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace crowdlf {

std::vector<int> majority_vote(const LabelMatrix& labels) {
  Matrix votes(labels.num_tasks, labels.num_categories);
  for (const LabelEntry& e : labels.entries) votes(e.task, e.label) += 1.0;
  std::vector<int> out(labels.num_tasks, 0);
  for (int i = 0; i < labels.num_tasks; ++i) {
    int best = 0;
    for (int c = 1; c < labels.num_categories; ++c) {
      if (votes(i, c) > votes(i, best)) best = c;  // strict: ties keep the lowest label
    }
    out[i] = best;
  }
  return out;
}

namespace {
constexpr double kSmoothing = 0.01;
}

ConfusionModel dawid_skene(const LabelMatrix& labels, int max_iters, double tol) {
  const int m = labels.num_tasks;
  const int n = labels.num_workers;
  const int C = labels.num_categories;

  ConfusionModel model;
  model.class_priors.assign(C, 0.0);
  model.posteriors = Matrix(m, C);
  model.confusion.assign(n, Matrix(C, C));

  const std::vector<int> mv = majority_vote(labels);
  for (int i = 0; i < m; ++i) model.posteriors(i, mv[i]) = 1.0;

  Matrix next(m, C);
  std::vector<double> log_prior(C);

  for (int iter = 1; iter <= max_iters; ++iter) {
    // M-step: priors and per-worker confusion rows from current posteriors,
    // additive smoothing keeps every probability positive.
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += model.posteriors(i, c);
      model.class_priors[c] = (s + kSmoothing) / (m + kSmoothing * C);
      log_prior[c] = std::log(model.class_priors[c]);
    }
    for (int w = 0; w < n; ++w) {
      std::fill(model.confusion[w].data.begin(), model.confusion[w].data.end(), 0.0);
    }
    for (const LabelEntry& e : labels.entries) {
      for (int c = 0; c < C; ++c) model.confusion[e.worker](c, e.label) += model.posteriors(e.task, c);
    }
    for (int w = 0; w < n; ++w) {
      for (int c = 0; c < C; ++c) {
        double denom = kSmoothing * C;
        for (int l = 0; l < C; ++l) denom += model.confusion[w](c, l);
        for (int l = 0; l < C; ++l) {
          model.confusion[w](c, l) = (model.confusion[w](c, l) + kSmoothing) / denom;
        }
      }
    }

    // E-step in log space; entries are task-major so one pass accumulates
    // each task's scores. Also collects the observed-data log-likelihood at
    // the current parameters.
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < C; ++c) next(i, c) = log_prior[c];
    }
    for (const LabelEntry& e : labels.entries) {
      for (int c = 0; c < C; ++c) next(e.task, c) += std::log(model.confusion[e.worker](c, e.label));
    }
    double loglik = 0.0;
    double delta = 0.0;
    for (int i = 0; i < m; ++i) {
      double mx = next(i, 0);
      for (int c = 1; c < C; ++c) mx = std::max(mx, next(i, c));
      double s = 0.0;
      for (int c = 0; c < C; ++c) {
        next(i, c) = std::exp(next(i, c) - mx);
        s += next(i, c);
      }
      loglik += mx + std::log(s);
      for (int c = 0; c < C; ++c) {
        next(i, c) /= s;
        delta = std::max(delta, std::fabs(next(i, c) - model.posteriors(i, c)));
      }
    }
    model.posteriors.data.swap(next.data);
    model.loglik_trace.push_back(loglik);
    model.iterations = iter;
    if (delta <= tol) {
      model.converged = true;
      break;
    }
  }

  model.hard_labels.assign(m, 0);
  for (int i = 0; i < m; ++i) {
    int best = 0;
    for (int c = 1; c < C; ++c) {
      if (model.posteriors(i, c) > model.posteriors(i, best)) best = c;
    }
    model.hard_labels[i] = best;
  }
  return model;
}

}  // namespace crowdlf
