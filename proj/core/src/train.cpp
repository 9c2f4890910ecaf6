#include "xaikit/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "xaikit/random.hpp"

using nlohmann::json;

namespace xaikit {

namespace {

constexpr std::size_t kMicroBatch = 8;
constexpr std::uint64_t kShuffleStream = 0x7A11;
constexpr std::uint64_t kDropoutStream = 0xD807;

struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Tensor> m, v;

  explicit Adam(const std::vector<NamedTensor>& params, double lr_in) : lr(lr_in) {
    for (const auto& p : params) {
      m.emplace_back(p.tensor.shape());
      v.emplace_back(p.tensor.shape());
    }
  }

  void step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& p = params[k].tensor;
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double g = grads[k][i];
        m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g;
        v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g * g;
        const double mhat = m[k][i] / bc1;
        const double vhat = v[k][i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      // Keep parameters on the float32 grid so checkpoints are lossless.
      round_to_float32(p);
    }
  }
};

Tensor assemble_batch(const std::vector<ImageSample>& samples, const std::vector<std::size_t>& order,
                      std::size_t begin, std::size_t end) {
  const Tensor& first = samples[order[begin]].pixels;
  Tensor batch({end - begin, first.dim(0), first.dim(1), first.dim(2)});
  const std::size_t stride = first.numel();
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor& px = samples[order[i]].pixels;
    if (px.numel() != stride) throw DimensionError("dataset images disagree in size");
    std::copy(px.data(), px.data() + stride, batch.data() + (i - begin) * stride);
  }
  return batch;
}

}  // namespace

std::vector<double> predict_positive_probs(const CnnModel& model, const std::vector<ImageSample>& samples) {
  std::vector<double> probs;
  probs.reserve(samples.size());
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t begin = 0; begin < samples.size(); begin += kMicroBatch) {
    const std::size_t end = std::min(samples.size(), begin + kMicroBatch);
    const Tensor out = model.forward(assemble_batch(samples, order, begin, end), false, 0);
    for (std::size_t i = 0; i < end - begin; ++i) probs.push_back(out(i, std::size_t{1}));
  }
  return probs;
}

EvaluationResult evaluate(const CnnModel& model, const std::vector<ImageSample>& samples, double threshold) {
  if (samples.empty()) throw ContractError("evaluate on an empty sample set");
  EvaluationResult r;
  r.probs = predict_positive_probs(model, samples);
  r.labels.reserve(samples.size());
  for (const auto& s : samples) r.labels.push_back(s.label);
  r.confusion = confusion(r.labels, r.probs, threshold);
  r.metrics = metrics_from_confusion(r.confusion);
  r.roc = roc_auc(r.labels, r.probs);
  return r;
}

TrainReport train(CnnModel& model, const DatasetSplit& split, const TrainConfig& config) {
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw ContractError("train requires nonempty train, validation and test parts");
  }
  if (config.epochs < 0 || config.batch_size < 1) throw ContractError("bad epoch or batch size");
  if (!(config.learning_rate > 0.0)) throw ContractError("learning rate must be positive");

  ClassWeights weights{1.0, 1.0};
  if (config.cost_sensitive) {
    if (config.weights) {
      weights = *config.weights;
      validate(weights);
    } else {
      long pos = 0, neg = 0;
      for (const auto& s : split.train) (s.label == 1 ? pos : neg)++;
      weights = compute_class_weights(pos, neg);
    }
  }

  TrainReport report;
  if (config.epochs == 0) return report;

  Adam adam(model.parameters(), config.learning_rate);
  std::vector<Tensor> grads;
  for (const auto& p : model.parameters()) grads.emplace_back(p.tensor.shape());

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t micro_counter = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    long epoch_correct = 0;
    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);

    for (std::size_t batch_begin = 0; batch_begin < order.size(); batch_begin += batch_size) {
      const std::size_t batch_end = std::min(order.size(), batch_begin + batch_size);
      const double batch_n = static_cast<double>(batch_end - batch_begin);

      for (auto& g : grads) std::fill(g.storage().begin(), g.storage().end(), 0.0);
      double batch_loss = 0.0;

      for (std::size_t begin = batch_begin; begin < batch_end; begin += kMicroBatch) {
        const std::size_t end = std::min(batch_end, begin + kMicroBatch);
        const Tensor batch = assemble_batch(split.train, order, begin, end);
        std::vector<int> labels;
        labels.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) labels.push_back(split.train[order[i]].label);

        Graph g;
        const auto trace =
            model.forward_trace(g, batch, true, derive_seed(config.seed, kDropoutStream, micro_counter++));
        const Var loss = weighted_log_loss_node(g, trace.probs, labels, weights);
        // Micro-batch losses are means; scale by the share of the batch so the
        // accumulated gradient equals the full-batch mean-loss gradient.
        const double share = static_cast<double>(end - begin) / batch_n;
        const Var scaled = g.scale(loss, share);
        g.backward(scaled);

        batch_loss += g.value(loss)[0] * share;
        for (std::size_t k = 0; k < grads.size(); ++k) {
          const Tensor& gk = g.grad(trace.params[k]);
          for (std::size_t i = 0; i < gk.numel(); ++i) grads[k][i] += gk[i];
        }
        const Tensor& probs = g.value(trace.probs);
        for (std::size_t i = 0; i < end - begin; ++i) {
          const bool predicted = probs(i, std::size_t{1}) >= 0.5;
          if (predicted == (labels[i] == 1)) ++epoch_correct;
        }
      }

      adam.step(model.parameters(), grads);
      epoch_loss += batch_loss * batch_n;
    }

    report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    report.train_accuracy.push_back(static_cast<double>(epoch_correct) / static_cast<double>(order.size()));

    // Validation pass, inference mode, same loss weights as training.
    std::vector<double> val_probs = predict_positive_probs(model, split.validation);
    std::vector<int> val_labels;
    val_labels.reserve(split.validation.size());
    for (const auto& s : split.validation) val_labels.push_back(s.label);
    report.val_loss.push_back(weighted_log_loss(val_labels, val_probs, weights));
    long correct = 0;
    for (std::size_t i = 0; i < val_labels.size(); ++i) {
      if ((val_probs[i] >= 0.5) == (val_labels[i] == 1)) ++correct;
    }
    report.val_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(val_labels.size()));
  }
  return report;
}

void write_metrics_json(const std::string& path, const EvaluationResult& result, double threshold) {
  const json doc{{"accuracy", result.metrics.accuracy},
                 {"precision", result.metrics.precision},
                 {"recall", result.metrics.recall},
                 {"f1", result.metrics.f1},
                 {"specificity", result.metrics.specificity},
                 {"auc", result.roc.auc},
                 {"confusion",
                  {{"tp", result.confusion.tp}, {"fn", result.confusion.fn}, {"fp", result.confusion.fp},
                   {"tn", result.confusion.tn}}},
                 {"threshold", threshold}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write metrics JSON " + path);
  out << doc.dump(2) << "\n";
}

void write_train_report_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write train report CSV " + path);
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  out.precision(17);
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << (e + 1) << "," << report.train_loss[e] << "," << report.train_accuracy[e] << "," << report.val_loss[e]
        << "," << report.val_accuracy[e] << "\n";
  }
}

}  // namespace xaikit
