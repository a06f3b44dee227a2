#include <cmath>
#include <cstddef>
#include <cstdint>
#include <immintrin.h>

#include "crowdlf/kernels.hpp"
#include "kernels_internal.hpp"

// AVX2+FMA variants. Main loops run 4 doubles per lane group with scalar
// tails; sums use per-lane accumulators folded once at the end, so each call
// has its own fixed summation order (different from the scalar backend's, so
// equivalence tests compare within floating-point tolerance, not bitwise).

namespace crowdlf::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// exp for 4 doubles: range reduction x = n*ln2 + r with a split ln2, a
// rational minimax approximation of exp(r) on [-ln2/2, ln2/2], then scaling
// by 2^n through the exponent bits. |x| outside [-708, 709] saturates to 0 or
// inf, matching what the scalar std::exp path produces there (up to the
// subnormal strip, which callers never rely on). Inputs are assumed finite.
inline __m256d exp4(__m256d x) {
  const __m256d kMin = _mm256_set1_pd(-708.0);
  const __m256d kMax = _mm256_set1_pd(709.0);
  const __m256d too_small = _mm256_cmp_pd(x, kMin, _CMP_LT_OQ);
  const __m256d too_big = _mm256_cmp_pd(x, kMax, _CMP_GT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, kMin), kMax);

  const __m256d kLog2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d kC1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d kC2 = _mm256_set1_pd(1.42860682030941723212e-6);
  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, kLog2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(n, kC1, x);
  x = _mm256_fnmadd_pd(n, kC2, x);

  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_fmadd_pd(p0, xx, p1);
  px = _mm256_fmadd_pd(px, xx, p2);
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_fmadd_pd(q0, xx, q1);
  qx = _mm256_fmadd_pd(qx, xx, q2);
  qx = _mm256_fmadd_pd(qx, xx, q3);
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // 2^n via exponent bits. The 2^52 + 2^51 magic keeps n + magic inside
  // [2^52, 2^53) for either sign of n, so the low mantissa bits hold n in
  // two's complement and the bit-pattern subtraction recovers it exactly.
  const __m256d kMagic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, kMagic)),
                                      _mm256_castpd_si256(kMagic));
  const __m256i pow2 =
      _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
  e = _mm256_mul_pd(e, _mm256_castsi256_pd(pow2));

  e = _mm256_andnot_pd(too_small, e);
  e = _mm256_blendv_pd(e, _mm256_set1_pd(HUGE_VAL), too_big);
  return e;
}

}  // namespace

double dot(const double* x, const double* y, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

void axpy(double a, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double sum(const double* x, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

double sq_dist(const double* x, const double* y, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    r += d * d;
  }
  return r;
}

void exp_inplace(double* x, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, exp4(_mm256_loadu_pd(x + i)));
  if (i < n) {
    double tail[4] = {0.0, 0.0, 0.0, 0.0};
    for (size_t j = i; j < n; ++j) tail[j - i] = x[j];
    _mm256_storeu_pd(tail, exp4(_mm256_loadu_pd(tail)));
    for (size_t j = i; j < n; ++j) x[j] = tail[j - i];
  }
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

}  // namespace crowdlf::kernels::avx2
