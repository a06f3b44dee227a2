#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crowdlf/objective.hpp"

using namespace crowdlf;

namespace {

// Independent likelihood recount: stable softmax per entry, straight loops,
// no shared code with the library hot path.
double nll_oracle(const LabelMatrix& labels, const FactorSet& factors,
                  const RotationSet& rotations, const Memberships& ms) {
  const int C = labels.num_categories;
  const int k = factors.dim();
  double total = 0.0;
  for (const LabelEntry& e : labels.entries) {
    std::vector<double> logits(C, 0.0);
    for (int c = 0; c < C; ++c) {
      std::vector<double> rotated(k, 0.0);
      const double* o = rotations.matrix(ms.worker_groups[e.worker], c);
      for (int r = 0; r < k; ++r) {
        if (c == 0) {
          rotated[r] = factors.worker_factors(e.worker, r);
        } else {
          for (int x = 0; x < k; ++x) {
            rotated[r] += o[r * k + x] * factors.worker_factors(e.worker, x);
          }
        }
      }
      for (int x = 0; x < k; ++x) logits[c] += factors.task_factors(e.task, x) * rotated[x];
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    total += std::log(z) - (logits[e.label] - mx);
  }
  return total;
}

struct Instance {
  LabelMatrix labels;
  FactorSet factors;
  RotationSet rotations;
  Memberships ms;
};

// Random dense-ish instance with orthogonal-ish rotations (exact orthogonality
// is not required by any objective routine; Gram-Schmidt keeps them sane).
Instance random_instance(uint64_t seed, int m, int n, int C, int D, int k) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, C - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Instance inst;
  inst.labels.num_tasks = m;
  inst.labels.num_workers = n;
  inst.labels.num_categories = C;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      if (unif(rng) < 0.75 || j == i % n) {
        inst.labels.entries.push_back({i, j, label(rng)});
      }
    }
  }
  inst.factors.task_factors = Matrix(m, k);
  for (double& v : inst.factors.task_factors.data) v = gauss(rng);
  inst.factors.worker_factors = Matrix(n, k);
  for (double& v : inst.factors.worker_factors.data) v = gauss(rng);

  inst.rotations = RotationSet::identity(D, C, k);
  for (int d = 0; d < D; ++d) {
    for (int c = 1; c < C; ++c) {
      double* o = inst.rotations.matrix(d, c);
      // random matrix -> Gram-Schmidt columns
      std::vector<double> g(static_cast<size_t>(k) * k);
      for (double& v : g) v = gauss(rng);
      for (int col = 0; col < k; ++col) {
        for (int prev = 0; prev < col; ++prev) {
          double dot = 0.0;
          for (int r = 0; r < k; ++r) dot += g[r * k + col] * g[r * k + prev];
          for (int r = 0; r < k; ++r) g[r * k + col] -= dot * g[r * k + prev];
        }
        double norm = 0.0;
        for (int r = 0; r < k; ++r) norm += g[r * k + col] * g[r * k + col];
        norm = std::sqrt(std::max(norm, 1e-12));
        for (int r = 0; r < k; ++r) g[r * k + col] /= norm;
      }
      std::copy(g.begin(), g.end(), o);
    }
  }

  inst.ms.task_groups.resize(m);
  std::uniform_int_distribution<int> tg(0, C - 1);
  for (int& g : inst.ms.task_groups) g = tg(rng);
  inst.ms.worker_groups.resize(n);
  std::uniform_int_distribution<int> wg(0, D - 1);
  for (int& g : inst.ms.worker_groups) g = wg(rng);
  return inst;
}

}  // namespace

TEST_CASE("two-category probabilities at logit gap 4") {
  // k=1: the category-1 "rotation" is the 1x1 orthogonal matrix (-1), so the
  // logits are (2, -2).
  RotationSet rot = RotationSet::identity(1, 2, 1);
  rot.matrix(0, 1)[0] = -1.0;
  const double a[] = {2.0};
  const double b[] = {1.0};
  const ProbabilityRow row = label_probabilities({a, 1}, {b, 1}, rot, 0);
  REQUIRE(row.p.size() == 2);
  CHECK(row.p[0] == doctest::Approx(0.9820137900379085).epsilon(1e-12));
  CHECK(row.p[1] == doctest::Approx(1.0 - 0.9820137900379085).epsilon(1e-9));
  CHECK(row.p[0] + row.p[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero factors give the uniform likelihood") {
  LabelMatrix labels;
  labels.num_tasks = 2;
  labels.num_workers = 2;
  labels.num_categories = 3;
  labels.entries = {{0, 0, 0}, {0, 1, 2}, {1, 0, 1}, {1, 1, 0}};
  FactorSet factors;
  factors.task_factors = Matrix(2, 3);
  factors.worker_factors = Matrix(2, 3);
  const RotationSet rot = RotationSet::identity(1, 3, 3);
  Memberships ms{{0, 1}, {0, 0}};

  const double nll = negative_log_likelihood(labels, factors, rot, ms);
  CHECK(nll == doctest::Approx(4.0 * 1.0986122886681098).epsilon(1e-13));
}

TEST_CASE("grouping penalty on a two-point group") {
  FactorSet factors;
  factors.task_factors = Matrix(2, 2);
  factors.task_factors(0, 0) = 1.0;
  factors.task_factors(1, 0) = 3.0;
  factors.worker_factors = Matrix(2, 2);  // both workers identical -> no cost
  Memberships ms{{0, 0}, {0, 0}};

  CHECK(grouping_penalty(factors, ms, 1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(grouping_penalty(factors, ms, 0.5) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(grouping_penalty(factors, ms, 0.0) == 0.0);
}

TEST_CASE("penalty is zero when every factor sits on its centroid") {
  Instance inst = random_instance(5, 6, 4, 3, 2, 3);
  const Centroids cent = compute_centroids(inst.factors, inst.ms, 3, 2);
  for (int i = 0; i < 6; ++i) {
    for (int x = 0; x < 3; ++x) {
      inst.factors.task_factors(i, x) = cent.task_centroids(inst.ms.task_groups[i], x);
    }
  }
  for (int j = 0; j < 4; ++j) {
    for (int x = 0; x < 3; ++x) {
      inst.factors.worker_factors(j, x) = cent.worker_centroids(inst.ms.worker_groups[j], x);
    }
  }
  CHECK(grouping_penalty(inst.factors, inst.ms, 2.5) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("likelihood matches the independent recount") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    const Instance inst = random_instance(seed, 7, 5, 3, 2, 3);
    const double lib =
        negative_log_likelihood(inst.labels, inst.factors, inst.rotations, inst.ms);
    const double ora = nll_oracle(inst.labels, inst.factors, inst.rotations, inst.ms);
    CHECK(lib == doctest::Approx(ora).epsilon(1e-11));
  }
}

TEST_CASE("penalized loss is likelihood plus penalty") {
  const Instance inst = random_instance(9, 5, 4, 2, 2, 2);
  const double nll =
      negative_log_likelihood(inst.labels, inst.factors, inst.rotations, inst.ms);
  const double pen = grouping_penalty(inst.factors, inst.ms, 0.7);
  CHECK(penalized_loss(inst.labels, inst.factors, inst.rotations, inst.ms, 0.7) ==
        doctest::Approx(nll + pen).epsilon(1e-13));
}

TEST_CASE("extreme logits stay finite through the probability floor") {
  LabelMatrix labels;
  labels.num_tasks = 1;
  labels.num_workers = 1;
  labels.num_categories = 2;
  labels.entries = {{0, 0, 1}};  // observe the crushed category
  FactorSet factors;
  factors.task_factors = Matrix(1, 1);
  factors.task_factors(0, 0) = 40.0;
  factors.worker_factors = Matrix(1, 1);
  factors.worker_factors(0, 0) = 40.0;
  RotationSet rot = RotationSet::identity(1, 2, 1);
  rot.matrix(0, 1)[0] = -1.0;  // logits (1600, -1600)
  Memberships ms{{0}, {0}};

  const ProbabilityRow row = label_probabilities(
      {factors.task_factors.row(0).data(), 1}, {factors.worker_factors.row(0).data(), 1}, rot, 0);
  CHECK(row.p[1] > 0.0);
  const double nll = negative_log_likelihood(labels, factors, rot, ms);
  CHECK(std::isfinite(nll));
  CHECK(nll <= -std::log(1e-300) + 1e-9);
  CHECK(nll >= 600.0);  // far beyond any real logit gap, still finite
}

TEST_CASE("analytic gradients match central finite differences") {
  const double h = 1e-5;
  const double tol = 1e-5;
  auto check_grad = [&](double fd, double an) {
    const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-3});
    CHECK(std::fabs(fd - an) / denom <= tol);
  };

  for (uint64_t seed : {11u, 12u, 13u}) {
    Instance inst = random_instance(seed, 5, 4, 3, 2, 3);
    const double lambda = seed == 11 ? 0.0 : 0.37;
    const Centroids cent = compute_centroids(inst.factors, inst.ms, 3, 2);
    const GradientBundle g = gradients(inst.labels, inst.factors, inst.rotations, inst.ms,
                                       lambda, cent);

    auto loss = [&] {
      return penalized_loss(inst.labels, inst.factors, inst.rotations, inst.ms, lambda);
    };

    for (size_t t = 0; t < inst.factors.task_factors.data.size(); ++t) {
      double& v = inst.factors.task_factors.data[t];
      const double keep = v;
      v = keep + h;
      const double fp = loss();
      v = keep - h;
      const double fm = loss();
      v = keep;
      check_grad((fp - fm) / (2 * h), g.task.data[t]);
    }
    for (size_t t = 0; t < inst.factors.worker_factors.data.size(); ++t) {
      double& v = inst.factors.worker_factors.data[t];
      const double keep = v;
      v = keep + h;
      const double fp = loss();
      v = keep - h;
      const double fm = loss();
      v = keep;
      check_grad((fp - fm) / (2 * h), g.worker.data[t]);
    }
    for (size_t t = 0; t < inst.rotations.data.size(); ++t) {
      double& v = inst.rotations.data[t];
      const double keep = v;
      v = keep + h;
      const double fp = loss();
      v = keep - h;
      const double fm = loss();
      v = keep;
      check_grad((fp - fm) / (2 * h), g.rotations[t]);
    }
  }
}

TEST_CASE("category-zero rotation gradients are identically zero") {
  const Instance inst = random_instance(21, 6, 4, 3, 2, 3);
  const Centroids cent = compute_centroids(inst.factors, inst.ms, 3, 2);
  const GradientBundle g =
      gradients(inst.labels, inst.factors, inst.rotations, inst.ms, 0.4, cent);
  const int k = 3;
  for (int d = 0; d < 2; ++d) {
    const size_t off = (static_cast<size_t>(d) * 3 + 0) * k * k;
    for (int t = 0; t < k * k; ++t) CHECK(g.rotations[off + t] == 0.0);
  }
}

TEST_CASE("workspace path equals the public entry points") {
  const Instance inst = random_instance(31, 8, 5, 3, 2, 3);
  detail::Workspace ws;
  detail::init_workspace(inst.labels, 3, ws);
  detail::refresh_rotated(inst.factors.worker_factors, inst.rotations, inst.ms.worker_groups,
                          ws);
  const double cached =
      detail::nll_cached(inst.labels, inst.factors.task_factors.data.data(), ws);
  const double direct =
      negative_log_likelihood(inst.labels, inst.factors, inst.rotations, inst.ms);
  CHECK(cached == doctest::Approx(direct).epsilon(1e-13));

  // Single-block gradients agree with the full bundle.
  const Centroids cent = compute_centroids(inst.factors, inst.ms, 3, 2);
  const GradientBundle full =
      gradients(inst.labels, inst.factors, inst.rotations, inst.ms, 0.3, cent);
  GradientBundle only;
  detail::refresh_rotated(inst.factors.worker_factors, inst.rotations, inst.ms.worker_groups,
                          ws);
  detail::gradients_cached(inst.labels, inst.factors, inst.rotations, inst.ms, 0.3, cent,
                           detail::kGradWorker, only, ws);
  REQUIRE(only.worker.data.size() == full.worker.data.size());
  for (size_t t = 0; t < full.worker.data.size(); ++t) {
    CHECK(only.worker.data[t] == doctest::Approx(full.worker.data[t]).epsilon(1e-12));
  }
}

TEST_CASE("one-sided penalty helper matches the full penalty") {
  const Instance inst = random_instance(41, 6, 5, 3, 2, 2);
  const double both = grouping_penalty(inst.factors, inst.ms, 1.3);
  const double task_side =
      detail::penalty_side(inst.factors.task_factors, inst.ms.task_groups, 1.3);
  const double worker_side =
      detail::penalty_side(inst.factors.worker_factors, inst.ms.worker_groups, 1.3);
  CHECK(both == doctest::Approx(task_side + worker_side).epsilon(1e-13));
}
