#include "xaikit/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "xaikit/error.hpp"

namespace xaikit {

ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> probs, double threshold) {
  if (labels.size() != probs.size()) throw ContractError("confusion: labels and probabilities differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    if (labels[i] == 1) {
      predicted ? ++cm.tp : ++cm.fn;
    } else {
      predicted ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw ContractError("metrics of an empty confusion matrix");
  Metrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());

  if (cm.tp + cm.fp > 0) {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  } else {
    m.precision_defined = false;
  }
  if (cm.tp + cm.fn > 0) {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  } else {
    m.recall_defined = false;
  }
  if (cm.tn + cm.fp > 0) {
    m.specificity = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  } else {
    m.specificity_defined = false;
  }
  if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_defined = false;
  }
  return m;
}

RocCurve roc_auc(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) throw ContractError("roc_auc: labels and probabilities differ in length");
  long pos = 0, neg = 0;
  for (int y : labels) (y == 1 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw ContractError("roc_auc requires both classes present");

  // Sort by score descending; sweep thresholds at each unique score.
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = probs[order[i]];
    while (i < order.size() && probs[order[i]] == score) {
      (labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), score});
  }

  double auc = 0.0;
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    const auto& a = roc.points[k - 1];
    const auto& b = roc.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  roc.auc = auc;
  return roc;
}

void write_roc_csv(const std::string& path, const RocCurve& roc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write ROC CSV " + path);
  out << "fpr,tpr,threshold\n";
  out.precision(17);
  for (const auto& p : roc.points) out << p.fpr << "," << p.tpr << "," << p.threshold << "\n";
}

}  // namespace xaikit
