#pragma once

#include <cstddef>

namespace crowdlf::kernels {

enum class Backend { kScalar, kAvx2 };

// Batch primitives behind the dispatch table. Extents are long in the fit
// hot path (per-entry logit buffers, whole factor matrices), so everything
// takes raw pointers and flat lengths and the per-call indirection is
// amortized. Each backend sums in a fixed order, so results are reproducible
// for a given backend.
struct Ops {
  double (*dot)(const double* x, const double* y, size_t n);
  void (*axpy)(double a, const double* x, double* y, size_t n);  // y += a * x
  double (*sum)(const double* x, size_t n);
  double (*sq_dist)(const double* x, const double* y, size_t n);
  void (*exp_inplace)(double* x, size_t n);
  // out[e*categories + c] = dot(a + task[e]*k, t + (worker[e]*categories + c)*k)
  void (*entry_logits)(const double* a, const double* t, const int* task, const int* worker,
                       size_t n_entries, int categories, int k, double* out);
};

// Active table. The default backend is the best one the CPU supports, unless
// the CROWDLF_KERNELS environment variable ("scalar" or "avx2") or
// set_backend() overrides it.
const Ops& active();
Backend active_backend();
void set_backend(Backend b);
bool avx2_available();

// Direct access to a specific backend, for equivalence tests.
const Ops& backend_ops(Backend b);

}  // namespace crowdlf::kernels
