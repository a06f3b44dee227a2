#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crowdlf/kernels.hpp"

using namespace crowdlf;

namespace {

std::vector<double> random_vec(uint64_t seed, size_t n, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = unif(rng);
  return v;
}

bool close_rel(double a, double b, double rel, double abs_tol = 0.0) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  const double diff = std::fabs(a - b);
  return diff <= abs_tol + rel * std::max(std::fabs(a), std::fabs(b));
}

const size_t kSizes[] = {0, 1, 3, 4, 7, 8, 31, 100, 1000, 4097};

struct BackendRestore {
  kernels::Backend saved = kernels::active_backend();
  ~BackendRestore() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar reference values") {
  const auto& ops = kernels::backend_ops(kernels::Backend::kScalar);

  const double x[] = {1.0, 2.0, 3.0};
  const double y[] = {4.0, 5.0, 6.0};
  CHECK(ops.dot(x, y, 3) == doctest::Approx(32.0).epsilon(1e-15));
  CHECK(ops.sum(x, 3) == doctest::Approx(6.0).epsilon(1e-15));

  const double p[] = {0.0, 0.0};
  const double q[] = {3.0, 4.0};
  CHECK(ops.sq_dist(p, q, 2) == doctest::Approx(25.0).epsilon(1e-15));

  double acc[] = {3.0, 4.0};
  const double step[] = {1.0, 2.0};
  ops.axpy(2.0, step, acc, 2);
  CHECK(acc[0] == doctest::Approx(5.0));
  CHECK(acc[1] == doctest::Approx(8.0));

  double ex[] = {0.0, std::log(2.0)};
  ops.exp_inplace(ex, 2);
  CHECK(ex[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ex[1] == doctest::Approx(2.0).epsilon(1e-14));

  // Empty extents are no-ops returning zero.
  CHECK(ops.dot(x, y, 0) == 0.0);
  CHECK(ops.sum(x, 0) == 0.0);
  CHECK(ops.sq_dist(p, q, 0) == 0.0);
}

TEST_CASE("entry_logits matches a naive recount on both backends") {
  const int k = 3, C = 2, n_tasks = 4, n_workers = 3;
  const std::vector<double> a = random_vec(11, static_cast<size_t>(n_tasks) * k, -2, 2);
  const std::vector<double> t =
      random_vec(12, static_cast<size_t>(n_workers) * C * k, -2, 2);
  const std::vector<int> task = {0, 1, 2, 3, 0, 3};
  const std::vector<int> worker = {0, 1, 2, 0, 2, 1};
  const size_t E = task.size();

  std::vector<double> expected(E * C, 0.0);
  for (size_t e = 0; e < E; ++e) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int d = 0; d < k; ++d) {
        s += a[static_cast<size_t>(task[e]) * k + d] *
             t[(static_cast<size_t>(worker[e]) * C + c) * k + d];
      }
      expected[e * C + c] = s;
    }
  }

  for (kernels::Backend b : {kernels::Backend::kScalar, kernels::Backend::kAvx2}) {
    if (b == kernels::Backend::kAvx2 && !kernels::avx2_available()) continue;
    std::vector<double> out(E * C, -1.0);
    kernels::backend_ops(b).entry_logits(a.data(), t.data(), task.data(), worker.data(), E, C,
                                         k, out.data());
    for (size_t i = 0; i < out.size(); ++i) {
      CAPTURE(i);
      CHECK(close_rel(out[i], expected[i], 1e-12, 1e-15));
    }
  }
}

TEST_CASE("avx2 backend matches scalar on random data") {
  if (!kernels::avx2_available()) return;
  const auto& sc = kernels::backend_ops(kernels::Backend::kScalar);
  const auto& av = kernels::backend_ops(kernels::Backend::kAvx2);

  for (size_t n : kSizes) {
    CAPTURE(n);
    const std::vector<double> x = random_vec(100 + n, n, -3, 3);
    const std::vector<double> y = random_vec(200 + n, n, -3, 3);

    CHECK(close_rel(sc.dot(x.data(), y.data(), n), av.dot(x.data(), y.data(), n), 1e-12,
                    1e-13));
    CHECK(close_rel(sc.sum(x.data(), n), av.sum(x.data(), n), 1e-12, 1e-13));
    CHECK(close_rel(sc.sq_dist(x.data(), y.data(), n), av.sq_dist(x.data(), y.data(), n),
                    1e-12, 1e-13));

    std::vector<double> ys = y, ya = y;
    sc.axpy(0.37, x.data(), ys.data(), n);
    av.axpy(0.37, x.data(), ya.data(), n);
    for (size_t i = 0; i < n; ++i) {
      CAPTURE(i);
      CHECK(close_rel(ys[i], ya[i], 1e-13, 1e-15));
    }

    std::vector<double> es = random_vec(300 + n, n, -30, 30);
    std::vector<double> ea = es;
    sc.exp_inplace(es.data(), n);
    av.exp_inplace(ea.data(), n);
    for (size_t i = 0; i < n; ++i) {
      CAPTURE(i);
      CHECK(close_rel(es[i], ea[i], 1e-13, 1e-300));
    }
  }
}

TEST_CASE("exp agrees with std::exp across the useful range and the edges") {
  // 709.2..709.78 is deliberately absent: the vector path saturates to inf a
  // hair early there, and no caller feeds logit gaps that large.
  const std::vector<double> inputs = {-1000.0, -750.0, -708.5, -708.0, -700.0, -690.0,
                                      -100.0,  -1.0,   -1e-8,  0.0,    1e-8,   0.5,
                                      1.0,     100.0,  700.0,  708.9,  710.0,  1000.0};
  for (kernels::Backend b : {kernels::Backend::kScalar, kernels::Backend::kAvx2}) {
    if (b == kernels::Backend::kAvx2 && !kernels::avx2_available()) continue;
    std::vector<double> v = inputs;
    kernels::backend_ops(b).exp_inplace(v.data(), v.size());
    for (size_t i = 0; i < v.size(); ++i) {
      CAPTURE(static_cast<int>(b));
      CAPTURE(inputs[i]);
      CHECK(close_rel(v[i], std::exp(inputs[i]), 1e-13, 1e-300));
    }
  }
}

TEST_CASE("backend selection") {
  BackendRestore restore;

  kernels::set_backend(kernels::Backend::kScalar);
  CHECK(kernels::active_backend() == kernels::Backend::kScalar);
  CHECK(&kernels::active() == &kernels::backend_ops(kernels::Backend::kScalar));

  if (kernels::avx2_available()) {
    kernels::set_backend(kernels::Backend::kAvx2);
    CHECK(kernels::active_backend() == kernels::Backend::kAvx2);
    CHECK(&kernels::active() == &kernels::backend_ops(kernels::Backend::kAvx2));
  } else {
    // Requesting the unavailable backend falls back to scalar.
    kernels::set_backend(kernels::Backend::kAvx2);
    CHECK(kernels::active_backend() == kernels::Backend::kScalar);
  }
}
