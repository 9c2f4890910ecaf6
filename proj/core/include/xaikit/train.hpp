#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xaikit/dataset.hpp"
#include "xaikit/loss.hpp"
#include "xaikit/metrics.hpp"
#include "xaikit/model.hpp"

namespace xaikit {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 50;
  double learning_rate = 1e-3;
  bool cost_sensitive = false;
  std::optional<ClassWeights> weights;  // derived from train counts when absent
  std::uint64_t seed = 0;
};

// Per-epoch curves; all four sequences share the length = epochs completed.
struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
};

// Minibatch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the weighted log loss;
// the standard branch is the weighted loss with weights (1,1), which makes the
// two branches bit-identical when the weights are ones. Deterministic for a
// fixed seed: batch order, dropout masks and parameter rounding are all
// seeded. Mutates the model in place and returns the report.
TrainReport train(CnnModel& model, const DatasetSplit& split, const TrainConfig& config);

struct EvaluationResult {
  ConfusionMatrix confusion;
  Metrics metrics;
  RocCurve roc;
  std::vector<int> labels;
  std::vector<double> probs;  // class-1 probability per sample
};

EvaluationResult evaluate(const CnnModel& model, const std::vector<ImageSample>& samples, double threshold = 0.5);

// Class-1 probabilities in sample order, inference mode, micro-batched.
std::vector<double> predict_positive_probs(const CnnModel& model, const std::vector<ImageSample>& samples);

// Report files. The metrics JSON carries exactly the documented fields:
// accuracy, precision, recall, f1, specificity, auc, confusion{tp,fn,fp,tn},
// threshold.
void write_metrics_json(const std::string& path, const EvaluationResult& result, double threshold);
void write_train_report_csv(const std::string& path, const TrainReport& report);

}  // namespace xaikit
