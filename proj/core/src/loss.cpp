#include "xaikit/loss.hpp"

#include <cmath>
#include <string>

namespace xaikit {

namespace {

double clamp_prob(double p) { return std::min(1.0 - kProbEpsilon, std::max(kProbEpsilon, p)); }

void check_inputs(std::span<const int> labels, std::span<const double> probs) {
  if (labels.empty()) throw ContractError("log loss of an empty batch");
  if (labels.size() != probs.size()) {
    throw ContractError("log loss: " + std::to_string(labels.size()) + " labels vs " + std::to_string(probs.size()) +
                        " probabilities");
  }
}

}  // namespace

void validate(const ClassWeights& weights) {
  if (!(weights.w_positive > 0.0) || !(weights.w_negative > 0.0) || !std::isfinite(weights.w_positive) ||
      !std::isfinite(weights.w_negative)) {
    throw ContractError("class weights must be strictly positive and finite");
  }
}

double log_loss(std::span<const int> labels, std::span<const double> probs) {
  check_inputs(labels, probs);
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    acc -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return acc / static_cast<double>(labels.size());
}

double weighted_log_loss(std::span<const int> labels, std::span<const double> probs, const ClassWeights& weights) {
  check_inputs(labels, probs);
  validate(weights);
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    acc -= labels[i] ? weights.w_positive * std::log(p) : weights.w_negative * std::log(1.0 - p);
  }
  return acc / static_cast<double>(labels.size());
}

ClassWeights compute_class_weights(long count_positive, long count_negative) {
  if (count_positive < 1 || count_negative < 1) throw ContractError("class weights need at least one sample per class");
  const double total = static_cast<double>(count_positive + count_negative);
  return ClassWeights{total / (2.0 * static_cast<double>(count_positive)),
                      total / (2.0 * static_cast<double>(count_negative))};
}

Var weighted_log_loss_node(Graph& graph, Var probs, const std::vector<int>& labels, const ClassWeights& weights) {
  validate(weights);
  const Tensor& p = graph.value(probs);
  if (p.rank() != 2 || p.dim(1) != 2) throw DimensionError("weighted_log_loss_node expects probabilities [N,2]");
  const std::size_t n = p.dim(0);
  if (labels.size() != n) throw ContractError("weighted_log_loss_node: label count does not match batch");
  if (n == 0) throw ContractError("weighted_log_loss_node: empty batch");

  Tensor pos_w({n}), neg_w({n});
  for (std::size_t i = 0; i < n; ++i) {
    pos_w[i] = labels[i] ? weights.w_positive : 0.0;
    neg_w[i] = labels[i] ? 0.0 : weights.w_negative;
  }

  Var p1 = graph.clamp(graph.column(probs, 1), kProbEpsilon, 1.0 - kProbEpsilon);
  Var log_p = graph.log(p1);
  Var log_1mp = graph.log(graph.add_scalar(graph.scale(p1, -1.0), 1.0));
  Var terms = graph.add(graph.mul_const(log_p, std::move(pos_w)), graph.mul_const(log_1mp, std::move(neg_w)));
  return graph.scale(graph.mean(terms), -1.0);
}

}  // namespace xaikit
