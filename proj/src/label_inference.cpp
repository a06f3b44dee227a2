#include "crowdlf/label_inference.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

#include "crowdlf/kernels.hpp"
#include "crowdlf/objective.hpp"

namespace crowdlf {

AlignedCentroids align_centroids(const Centroids& centroids, const RotationSet& rotations) {
  const int C = rotations.num_categories;
  const int D = rotations.num_groups;
  const int k = rotations.dim;
  if (centroids.worker_centroids.rows != D || centroids.worker_centroids.cols != k) {
    throw std::invalid_argument("worker centroid shape does not match the rotation set");
  }
  AlignedCentroids out;
  out.num_categories = C;
  out.num_groups = D;
  out.dim = k;
  out.beta.assign(static_cast<size_t>(C) * D * k, 0.0);
  for (int c = 0; c < C; ++c) {
    for (int d = 0; d < D; ++d) {
      const double* o = rotations.matrix(d, c);
      const auto base = centroids.worker_centroids.row(d);
      double* dst = out.beta.data() + (static_cast<size_t>(c) * D + d) * k;
      if (c == 0) {
        std::memcpy(dst, base.data(), sizeof(double) * k);
        continue;
      }
      for (int r = 0; r < k; ++r) {
        double s = 0.0;
        for (int x = 0; x < k; ++x) s += o[static_cast<size_t>(r) * k + x] * base[x];
        dst[r] = s;
      }
    }
  }
  return out;
}

LabelDecision decide_labels(const Centroids& centroids, const AlignedCentroids& aligned,
                            const Memberships& memberships) {
  const int C = aligned.num_categories;
  const int D = aligned.num_groups;
  const int k = aligned.dim;
  if (centroids.task_centroids.cols != k) {
    throw std::invalid_argument("task centroid width does not match the aligned set");
  }
  const int num_task_groups = centroids.task_centroids.rows;
  const auto& ops = kernels::active();

  LabelDecision decision;
  decision.category_label.assign(num_task_groups, 0);
  decision.category_source.assign(num_task_groups, 0);
  decision.category_score.assign(num_task_groups, 0.0);

  for (int g = 0; g < num_task_groups; ++g) {
    const auto alpha = centroids.task_centroids.row(g);
    int best_c = 0, best_d = 0;
    double best = -std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      for (int d = 0; d < D; ++d) {
        // Empty worker groups carry an all-zero placeholder centroid; their
        // scores are meaningless, so they never win.
        if (d < static_cast<int>(centroids.worker_group_empty.size()) &&
            centroids.worker_group_empty[d]) {
          continue;
        }
        const double s =
            ops.dot(alpha.data(), aligned.beta.data() + (static_cast<size_t>(c) * D + d) * k,
                    static_cast<size_t>(k));
        if (s > best) {  // strict: ties keep the lexicographically first (c, d)
          best = s;
          best_c = c;
          best_d = d;
        }
        worst = std::min(worst, s);
      }
    }
    decision.category_label[g] = best_c;
    decision.category_source[g] = best_d;
    decision.category_score[g] = best;
    if (!(best > worst)) decision.degenerate = true;  // no separation at all
  }

  // Two task groups mapping to the same category is legal but worth surfacing.
  std::vector<int> seen(C, 0);
  for (int g = 0; g < num_task_groups; ++g) {
    if (seen[decision.category_label[g]]++) decision.collision = true;
  }

  decision.task_labels.assign(memberships.task_groups.size(), 0);
  for (size_t i = 0; i < memberships.task_groups.size(); ++i) {
    const int g = memberships.task_groups[i];
    decision.task_labels[i] = g < num_task_groups ? decision.category_label[g] : 0;
  }
  return decision;
}

std::vector<int> predicted_label_fit(const LabelMatrix& labels, const FactorSet& factors,
                                     const RotationSet& rotations,
                                     const Memberships& memberships) {
  std::vector<int> out(labels.entries.size(), 0);
  for (size_t e = 0; e < labels.entries.size(); ++e) {
    const LabelEntry& entry = labels.entries[e];
    const ProbabilityRow probs = label_probabilities(
        factors.task_factors.row(entry.task), factors.worker_factors.row(entry.worker),
        rotations, memberships.worker_groups[entry.worker]);
    int best = 0;
    for (int c = 1; c < labels.num_categories; ++c) {
      if (probs.p[c] > probs.p[best]) best = c;
    }
    out[e] = best;
  }
  return out;
}

}  // namespace crowdlf
