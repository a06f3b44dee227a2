#pragma once

#include <vector>

#include "crowdlf/types.hpp"

namespace crowdlf {

// Per-task plurality label; ties go to the lowest label.
std::vector<int> majority_vote(const LabelMatrix& labels);

struct ConfusionModel {
  std::vector<double> class_priors;  // C
  Matrix posteriors;                 // m x C
  std::vector<Matrix> confusion;     // per worker: C x C, row = true class, col = observed
  std::vector<int> hard_labels;      // argmax posterior, ties to lowest
  std::vector<double> loglik_trace;  // observed-data log-likelihood per iteration
  int iterations = 0;
  bool converged = false;
};

// Dawid-Skene EM initialized from majority-vote one-hot posteriors. Each
// iteration runs the M-step (priors and confusion rows with additive
// smoothing 0.01) and then the E-step in log space; stops when the largest
// posterior change is <= tol.
ConfusionModel dawid_skene(const LabelMatrix& labels, int max_iters = 100, double tol = 1e-6);

}  // namespace crowdlf
