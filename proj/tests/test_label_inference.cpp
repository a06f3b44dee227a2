#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "crowdlf/label_inference.hpp"
#include "crowdlf/types.hpp"

using namespace crowdlf;

namespace {

// Rotation-by-angle 2x2 orthogonal matrix written into a RotationSet slot.
void set_rotation2(RotationSet& rot, int group, int category, double angle) {
  double* o = rot.matrix(group, category);
  o[0] = std::cos(angle);
  o[1] = -std::sin(angle);
  o[2] = std::sin(angle);
  o[3] = std::cos(angle);
}

Centroids make_centroids(const Matrix& task, const Matrix& worker) {
  Centroids c;
  c.task_centroids = task;
  c.worker_centroids = worker;
  c.task_group_empty.assign(task.rows, 0);
  c.worker_group_empty.assign(worker.rows, 0);
  return c;
}

// Score of (category, worker group) for one task group, by plain loops over
// the unaligned inputs: alpha' O_c^(d) beta_d, with O_0 = I regardless of
// what the category-0 slot stores.
double oracle_score(const Centroids& centroids, const RotationSet& rot, int g, int c, int d) {
  const int k = rot.dim;
  const auto alpha = centroids.task_centroids.row(g);
  const auto beta = centroids.worker_centroids.row(d);
  double s = 0.0;
  if (c == 0) {
    for (int x = 0; x < k; ++x) s += alpha[x] * beta[x];
    return s;
  }
  const double* o = rot.matrix(d, c);
  for (int r = 0; r < k; ++r) {
    double rotated = 0.0;
    for (int x = 0; x < k; ++x) rotated += o[r * k + x] * beta[x];
    s += alpha[r] * rotated;
  }
  return s;
}

}  // namespace

TEST_CASE("aligning pushes worker centroids through each rotation") {
  Matrix task(2, 2);
  Matrix worker(1, 2);
  worker(0, 0) = 1.0;  // unit x
  Centroids centroids = make_centroids(task, worker);

  RotationSet rot = RotationSet::identity(1, 2, 2);
  set_rotation2(rot, 0, 1, M_PI / 2);  // quarter turn

  const AlignedCentroids aligned = align_centroids(centroids, rot);
  CHECK(aligned.num_categories == 2);
  CHECK(aligned.num_groups == 1);
  CHECK(aligned.dim == 2);

  const auto b00 = aligned.at(0, 0);  // category 0: copied as-is
  CHECK(b00[0] == 1.0);
  CHECK(b00[1] == 0.0);
  const auto b10 = aligned.at(1, 0);  // quarter turn of unit x is unit y
  CHECK(std::fabs(b10[0]) < 1e-15);
  CHECK(b10[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("category 0 ignores whatever the pinned slot stores") {
  Matrix task(1, 2);
  Matrix worker(1, 2);
  worker(0, 0) = 3.0;
  worker(0, 1) = -2.0;
  Centroids centroids = make_centroids(task, worker);

  RotationSet rot = RotationSet::identity(1, 2, 2);
  double* pinned = rot.matrix(0, 0);
  pinned[0] = 7.0;  // garbage that must not leak into the result
  pinned[3] = -7.0;

  const AlignedCentroids aligned = align_centroids(centroids, rot);
  CHECK(aligned.at(0, 0)[0] == 3.0);
  CHECK(aligned.at(0, 0)[1] == -2.0);
}

TEST_CASE("aligning rejects mismatched shapes") {
  Matrix task(2, 2);
  Matrix worker(2, 3);  // wrong width for a dim-2 rotation set
  const Centroids centroids = make_centroids(task, worker);
  const RotationSet rot = RotationSet::identity(2, 2, 2);
  CHECK_THROWS_AS(align_centroids(centroids, rot), std::invalid_argument);
}

TEST_CASE("label decisions match an exhaustive argmax") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);

  for (int trial = 0; trial < 30; ++trial) {
    const int C = 2 + static_cast<int>(rng() % 3);  // 2..4
    const int D = 1 + static_cast<int>(rng() % 3);  // 1..3
    const int k = 2;
    Matrix task(C, k);
    Matrix worker(D, k);
    for (double& v : task.data) v = gauss(rng);
    for (double& v : worker.data) v = gauss(rng);
    Centroids centroids = make_centroids(task, worker);

    RotationSet rot = RotationSet::identity(D, C, k);
    for (int d = 0; d < D; ++d) {
      for (int c = 1; c < C; ++c) set_rotation2(rot, d, c, angle(rng));
    }

    Memberships memberships;
    memberships.task_groups = {0, C - 1, 0};
    memberships.worker_groups.assign(D, 0);

    const AlignedCentroids aligned = align_centroids(centroids, rot);
    const LabelDecision decision = decide_labels(centroids, aligned, memberships);

    for (int g = 0; g < C; ++g) {
      int best_c = 0, best_d = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < C; ++c) {
        for (int d = 0; d < D; ++d) {
          const double s = oracle_score(centroids, rot, g, c, d);
          if (s > best) {
            best = s;
            best_c = c;
            best_d = d;
          }
        }
      }
      CAPTURE(trial);
      CAPTURE(g);
      CHECK(decision.category_label[g] == best_c);
      CHECK(decision.category_source[g] == best_d);
      CHECK(decision.category_score[g] == doctest::Approx(best).epsilon(1e-12));
    }
    CHECK_FALSE(decision.degenerate);  // continuous random scores never tie
    CHECK(decision.task_labels[0] == decision.category_label[0]);
    CHECK(decision.task_labels[1] == decision.category_label[C - 1]);
    CHECK(decision.task_labels[2] == decision.category_label[0]);
  }
}

TEST_CASE("decisions are invariant under a shared orthogonal change of basis") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  const int C = 3, D = 2, k = 2;

  for (int trial = 0; trial < 20; ++trial) {
    Matrix task(C, k);
    Matrix worker(D, k);
    for (double& v : task.data) v = gauss(rng);
    for (double& v : worker.data) v = gauss(rng);
    RotationSet rot = RotationSet::identity(D, C, k);
    for (int d = 0; d < D; ++d) {
      for (int c = 1; c < C; ++c) set_rotation2(rot, d, c, angle(rng));
    }

    const double t = angle(rng);
    const double q[4] = {std::cos(t), -std::sin(t), std::sin(t), std::cos(t)};

    // alpha -> Q alpha, beta -> Q beta, O -> Q O Q'.
    Matrix task2(C, k);
    Matrix worker2(D, k);
    for (int g = 0; g < C; ++g) {
      for (int r = 0; r < k; ++r) {
        task2(g, r) = q[r * k] * task(g, 0) + q[r * k + 1] * task(g, 1);
      }
    }
    for (int d = 0; d < D; ++d) {
      for (int r = 0; r < k; ++r) {
        worker2(d, r) = q[r * k] * worker(d, 0) + q[r * k + 1] * worker(d, 1);
      }
    }
    RotationSet rot2 = RotationSet::identity(D, C, k);
    for (int d = 0; d < D; ++d) {
      for (int c = 1; c < C; ++c) {
        const double* o = rot.matrix(d, c);
        double qo[4];  // Q O
        for (int r = 0; r < 2; ++r) {
          for (int s = 0; s < 2; ++s) {
            qo[r * 2 + s] = q[r * 2] * o[s] + q[r * 2 + 1] * o[2 + s];
          }
        }
        double* out = rot2.matrix(d, c);
        for (int r = 0; r < 2; ++r) {  // (Q O) Q'
          for (int s = 0; s < 2; ++s) {
            out[r * 2 + s] = qo[r * 2] * q[s * 2] + qo[r * 2 + 1] * q[s * 2 + 1];
          }
        }
      }
    }

    Memberships memberships;
    memberships.task_groups = {0, 1, 2};
    memberships.worker_groups = {0, 1};

    const Centroids c1 = make_centroids(task, worker);
    const Centroids c2 = make_centroids(task2, worker2);
    const LabelDecision d1 = decide_labels(c1, align_centroids(c1, rot), memberships);
    const LabelDecision d2 = decide_labels(c2, align_centroids(c2, rot2), memberships);

    CAPTURE(trial);
    CHECK(d1.category_label == d2.category_label);
    CHECK(d1.category_source == d2.category_source);
    for (int g = 0; g < C; ++g) {
      CHECK(d1.category_score[g] == doctest::Approx(d2.category_score[g]).epsilon(1e-10));
    }
  }
}

TEST_CASE("a zero task centroid is flagged as degenerate") {
  Matrix task(2, 2);
  task(0, 0) = 1.0;  // group 0 is fine; group 1 row stays all zero
  Matrix worker(1, 2);
  worker(0, 0) = 1.0;
  Centroids centroids = make_centroids(task, worker);
  RotationSet rot = RotationSet::identity(1, 2, 2);
  set_rotation2(rot, 0, 1, M_PI);  // half turn makes category 1 score -1 for group 0

  Memberships memberships;
  memberships.task_groups = {0, 1};
  memberships.worker_groups = {0};

  const LabelDecision decision =
      decide_labels(centroids, align_centroids(centroids, rot), memberships);
  CHECK(decision.degenerate);
  CHECK(decision.category_label[1] == 0);  // falls back to the first candidate
  CHECK(decision.category_source[1] == 0);
  CHECK(decision.category_label[0] == 0);  // score +1 beats the rotated -1
}

TEST_CASE("two groups picking the same label is a collision") {
  Matrix task(2, 2);
  task(0, 0) = 1.0;
  task(1, 0) = 0.5;  // same direction, so the same category wins twice
  Matrix worker(1, 2);
  worker(0, 0) = 1.0;
  Centroids centroids = make_centroids(task, worker);
  RotationSet rot = RotationSet::identity(1, 2, 2);
  set_rotation2(rot, 0, 1, M_PI);

  Memberships memberships;
  memberships.task_groups = {0, 1};
  memberships.worker_groups = {0};

  const LabelDecision decision =
      decide_labels(centroids, align_centroids(centroids, rot), memberships);
  CHECK(decision.collision);
  CHECK_FALSE(decision.degenerate);
  CHECK(decision.category_label == std::vector<int>{0, 0});
}

TEST_CASE("empty worker groups never win the argmax") {
  Matrix task(2, 2);
  task(0, 0) = 1.0;
  task(0, 1) = 0.5;
  task(1, 0) = 0.5;
  task(1, 1) = 1.0;
  Matrix worker(2, 2);
  worker(0, 0) = 1.0;    // live group
  worker(1, 0) = 100.0;  // empty group with a huge placeholder score
  worker(1, 1) = 100.0;
  Centroids centroids = make_centroids(task, worker);
  centroids.worker_group_empty[1] = 1;

  RotationSet rot = RotationSet::identity(2, 2, 2);
  set_rotation2(rot, 0, 1, M_PI / 2);
  set_rotation2(rot, 1, 1, M_PI / 2);

  Memberships memberships;
  memberships.task_groups = {0, 1};
  memberships.worker_groups = {0, 0};

  const LabelDecision decision =
      decide_labels(centroids, align_centroids(centroids, rot), memberships);
  // Group 0 leans x (category 0 scores 1 vs rotated 0.5); group 1 leans y.
  CHECK(decision.category_label == std::vector<int>{0, 1});
  CHECK(decision.category_source == std::vector<int>{0, 0});  // group 1 skipped
}

TEST_CASE("exact ties resolve to the lower label then the lower group") {
  Matrix task(1, 2);
  task(0, 0) = 1.0;
  Matrix worker(2, 2);
  worker(0, 0) = 1.0;
  worker(1, 0) = 1.0;
  Centroids centroids = make_centroids(task, worker);
  const RotationSet rot = RotationSet::identity(2, 2, 2);  // every score is 1

  Memberships memberships;
  memberships.task_groups = {0};
  memberships.worker_groups = {0, 1};

  const LabelDecision decision =
      decide_labels(centroids, align_centroids(centroids, rot), memberships);
  CHECK(decision.category_label[0] == 0);
  CHECK(decision.category_source[0] == 0);
  CHECK(decision.category_score[0] == 1.0);
}

TEST_CASE("per-entry fitted labels match a local logit argmax") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  const int m = 7, n = 5, C = 3, D = 2, k = 2;

  LabelMatrix labels;
  labels.num_tasks = m;
  labels.num_workers = n;
  labels.num_categories = C;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) labels.entries.push_back({i, j, static_cast<int>(rng() % C)});
  }

  FactorSet factors;
  factors.task_factors = Matrix(m, k);
  factors.worker_factors = Matrix(n, k);
  for (double& v : factors.task_factors.data) v = gauss(rng);
  for (double& v : factors.worker_factors.data) v = gauss(rng);

  RotationSet rot = RotationSet::identity(D, C, k);
  for (int d = 0; d < D; ++d) {
    for (int c = 1; c < C; ++c) set_rotation2(rot, d, c, angle(rng));
  }

  Memberships memberships;
  memberships.task_groups.assign(m, 0);
  memberships.worker_groups.resize(n);
  for (int j = 0; j < n; ++j) memberships.worker_groups[j] = j % D;

  const std::vector<int> fit = predicted_label_fit(labels, factors, rot, memberships);
  REQUIRE(fit.size() == labels.entries.size());

  for (size_t e = 0; e < labels.entries.size(); ++e) {
    const auto& entry = labels.entries[e];
    const int d = memberships.worker_groups[entry.worker];
    int best = 0;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      double logit = 0.0;
      for (int r = 0; r < k; ++r) {
        if (c == 0) {
          logit += factors.task_factors(entry.task, r) * factors.worker_factors(entry.worker, r);
        } else {
          const double* o = rot.matrix(d, c);
          double rotated = 0.0;
          for (int x = 0; x < k; ++x) rotated += o[r * k + x] * factors.worker_factors(entry.worker, x);
          logit += factors.task_factors(entry.task, r) * rotated;
        }
      }
      if (logit > best_logit + 1e-12) {  // tolerate softmax rounding on near-ties
        best_logit = logit;
        best = c;
      }
    }
    CAPTURE(e);
    CHECK(fit[e] == best);
  }
}

TEST_CASE("zero factors predict the lowest label everywhere") {
  LabelMatrix labels;
  labels.num_tasks = 2;
  labels.num_workers = 2;
  labels.num_categories = 3;
  labels.entries = {{0, 0, 2}, {0, 1, 1}, {1, 0, 0}, {1, 1, 2}};

  FactorSet factors;
  factors.task_factors = Matrix(2, 2);
  factors.worker_factors = Matrix(2, 2);
  Memberships memberships;
  memberships.task_groups = {0, 0};
  memberships.worker_groups = {0, 0};
  const RotationSet rot = RotationSet::identity(1, 3, 2);

  const std::vector<int> fit = predicted_label_fit(labels, factors, rot, memberships);
  CHECK(fit == std::vector<int>(4, 0));
}
