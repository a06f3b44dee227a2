#pragma once

#include <span>
#include <vector>

#include "crowdlf/types.hpp"

namespace crowdlf {

// Worker-group centroids pushed through each category rotation:
// beta(c, d) = O_c^{(d)} * worker_centroid_d.
struct AlignedCentroids {
  int num_categories = 0;
  int num_groups = 0;
  int dim = 0;
  std::vector<double> beta;  // vector (c, d) starts at (c * num_groups + d) * dim

  std::span<const double> at(int category, int group) const {
    return {beta.data() + (static_cast<size_t>(category) * num_groups + group) * dim,
            static_cast<size_t>(dim)};
  }
};

// Stage-2 output. For each task group I the pair (label, source) maximizing
// task_centroid_I' beta(c, d); ties resolved to the lower label, then the
// lower group. task_labels[i] = category_label[task group of i].
struct LabelDecision {
  std::vector<int> category_label;
  std::vector<int> category_source;
  std::vector<double> category_score;
  std::vector<int> task_labels;
  bool degenerate = false;  // some category saw no score separation at all
  bool collision = false;   // two task groups mapped to the same label
};

AlignedCentroids align_centroids(const Centroids& centroids, const RotationSet& rotations);

LabelDecision decide_labels(const Centroids& centroids, const AlignedCentroids& aligned,
                            const Memberships& memberships);

// Most probable label under the fitted model for every observed entry, in
// entry order; ties go to the lowest label.
std::vector<int> predicted_label_fit(const LabelMatrix& labels, const FactorSet& factors,
                                     const RotationSet& rotations,
                                     const Memberships& memberships);

}  // namespace crowdlf
