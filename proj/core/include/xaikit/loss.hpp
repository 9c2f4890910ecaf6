#pragma once

#include <span>
#include <vector>

#include "xaikit/autodiff.hpp"

namespace xaikit {

// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before any
// logarithm so perfect predictions cannot produce infinities.
inline constexpr double kProbEpsilon = 1e-7;

// Per-class loss weights for cost-sensitive training. w_positive multiplies
// the y*log(p) term (label 1, Tumor); w_negative the (1-y)*log(1-p) term.
struct ClassWeights {
  double w_positive = 1.0;
  double w_negative = 1.0;
};

void validate(const ClassWeights& weights);

// Mean binary cross entropy over the batch:
//   (1/N) * sum_i -[ y_i*log(p_i) + (1-y_i)*log(1-p_i) ]
double log_loss(std::span<const int> labels, std::span<const double> probs);

// Class-weighted variant:
//   (1/N) * sum_i -[ w_pos*y_i*log(p_i) + w_neg*(1-y_i)*log(1-p_i) ]
// With weights (1,1) this reduces to log_loss exactly.
double weighted_log_loss(std::span<const int> labels, std::span<const double> probs, const ClassWeights& weights);

// Balanced inverse-frequency weights, w_c = N / (2 * N_c): the minority class
// receives the larger weight and total effective mass is preserved.
ClassWeights compute_class_weights(long count_positive, long count_negative);

// Tape version for training: probs is an [N,2] node with the class-1
// probability in column 1. Returns the scalar weighted loss node.
Var weighted_log_loss_node(Graph& graph, Var probs, const std::vector<int>& labels, const ClassWeights& weights);

}  // namespace xaikit
