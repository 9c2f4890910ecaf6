#pragma once

#include <span>
#include <string>
#include <vector>

namespace xaikit {

// Binary confusion counts; positive class = Tumor (label 1).
struct ConfusionMatrix {
  long tp = 0;
  long fn = 0;
  long fp = 0;
  long tn = 0;

  long total() const { return tp + fn + fp + tn; }
};

// The five scores of the evaluation protocol. A denominator of zero yields a
// score of 0 with the matching *_defined flag cleared, so reports stay
// machine-readable instead of carrying NaNs.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double specificity = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
  bool specificity_defined = true;
};

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;
};

// Points sorted by nondecreasing fpr, endpoints (0,0) and (1,1) included.
// auc equals the probability that a random positive outranks a random
// negative, with ties counting one half.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// prediction = 1 iff prob >= threshold.
ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> probs, double threshold = 0.5);

Metrics metrics_from_confusion(const ConfusionMatrix& cm);

// Threshold sweep over unique scores, descending; AUC by trapezoid rule.
// Requires both classes present.
RocCurve roc_auc(std::span<const int> labels, std::span<const double> probs);

void write_roc_csv(const std::string& path, const RocCurve& roc);

}  // namespace xaikit
