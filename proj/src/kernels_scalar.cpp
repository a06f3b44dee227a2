#include <cmath>
#include <cstddef>

#include "crowdlf/kernels.hpp"
#include "kernels_internal.hpp"

// Reference implementations. Plain loops, one fixed summation order; the
// AVX2 variants are tested for equivalence against these.

namespace crowdlf::kernels::scalar {

double dot(const double* x, const double* y, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum(const double* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sq_dist(const double* x, const double* y, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

void exp_inplace(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

void entry_logits(const double* a, const double* t, const int* task, const int* worker,
                  size_t n_entries, int categories, int k, double* out) {
  for (size_t e = 0; e < n_entries; ++e) {
    const double* ai = a + static_cast<size_t>(task[e]) * k;
    const double* tj = t + static_cast<size_t>(worker[e]) * categories * k;
    double* row = out + e * categories;
    for (int c = 0; c < categories; ++c) {
      row[c] = dot(ai, tj + static_cast<size_t>(c) * k, static_cast<size_t>(k));
    }
  }
}

const Ops kOps = {dot, axpy, sum, sq_dist, exp_inplace, entry_logits};

}  // namespace crowdlf::kernels::scalar
