#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_support.hpp"
#include "xaikit/random.hpp"
#include "xaikit/train.hpp"

using namespace xaikit;
using testutil::TempDir;

namespace {

ModelConfig square_config() {
  ModelConfig c;
  c.input_height = 12;
  c.input_width = 12;
  c.input_channels = 1;
  c.conv_filters = {4, 6};
  c.dense_units = 16;
  return c;
}

// Bright 4x4 square on a noisy dark background = class 1; noise only = 0.
ImageSample square_sample(bool positive, std::uint64_t seed) {
  Rng rng(seed);
  Tensor px({1, 12, 12});
  for (std::size_t i = 0; i < px.numel(); ++i) px[i] = 0.1 + 0.1 * rng.uniform();
  if (positive) {
    const std::size_t y0 = rng.below(8), x0 = rng.below(8);
    for (std::size_t y = y0; y < y0 + 4; ++y)
      for (std::size_t x = x0; x < x0 + 4; ++x) px(std::size_t{0}, y, x) = 0.9;
  }
  return {std::move(px), positive ? 1 : 0, "synthetic://" + std::to_string(seed)};
}

DatasetSplit square_split(std::size_t train_n, std::size_t val_n, std::size_t test_n, std::uint64_t seed) {
  DatasetSplit split;
  split.seed = seed;
  std::uint64_t tag = seed * 1000;
  const auto fill = [&](std::vector<ImageSample>& part, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) part.push_back(square_sample(i % 2 == 0, ++tag));
  };
  fill(split.train, train_n);
  fill(split.validation, val_n);
  fill(split.test, test_n);
  return split;
}

bool same_parameters(const CnnModel& a, const CnnModel& b) {
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    if (!testutil::bitwise_equal(a.parameters()[i].tensor, b.parameters()[i].tensor)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero epochs returns the model unchanged with an empty report") {
  CnnModel model = CnnModel::build(square_config(), 1);
  const CnnModel before = model;
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainReport report = train(model, square_split(8, 4, 4, 2), cfg);
  CHECK(report.train_loss.empty());
  CHECK(report.val_loss.empty());
  CHECK(same_parameters(model, before));
}

TEST_CASE("training twice from the same seed is bitwise identical") {
  const DatasetSplit split = square_split(16, 4, 4, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 5;
  cfg.learning_rate = 1e-3;
  cfg.seed = 11;

  CnnModel a = CnnModel::build(square_config(), 4);
  CnnModel b = CnnModel::build(square_config(), 4);
  const TrainReport ra = train(a, split, cfg);
  const TrainReport rb = train(b, split, cfg);
  CHECK(same_parameters(a, b));
  REQUIRE(ra.train_loss.size() == rb.train_loss.size());
  for (std::size_t e = 0; e < ra.train_loss.size(); ++e) {
    CHECK(ra.train_loss[e] == rb.train_loss[e]);
    CHECK(ra.val_accuracy[e] == rb.val_accuracy[e]);
  }
}

TEST_CASE("cost-sensitive step with unit weights is bit-identical to the standard step") {
  const DatasetSplit split = square_split(10, 4, 4, 5);
  TrainConfig standard;
  standard.epochs = 1;
  standard.batch_size = 10;
  standard.seed = 21;

  TrainConfig unit_cs = standard;
  unit_cs.cost_sensitive = true;
  unit_cs.weights = ClassWeights{1.0, 1.0};

  CnnModel a = CnnModel::build(square_config(), 6);
  CnnModel b = CnnModel::build(square_config(), 6);
  train(a, split, standard);
  train(b, split, unit_cs);
  CHECK(same_parameters(a, b));
}

TEST_CASE("cost-sensitive branch derives weights from train counts when absent") {
  DatasetSplit split = square_split(12, 4, 4, 7);
  // make it imbalanced: 9 positive / 3 negative
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    split.train[i] = square_sample(i % 4 != 0, 900 + i);
  }
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 6;
  cfg.cost_sensitive = true;
  cfg.seed = 1;
  CnnModel m = CnnModel::build(square_config(), 8);
  CHECK_NOTHROW(train(m, split, cfg));
}

TEST_CASE("train rejects empty split parts and bad hyperparameters") {
  CnnModel m = CnnModel::build(square_config(), 9);
  DatasetSplit split = square_split(8, 4, 4, 9);
  split.validation.clear();
  TrainConfig cfg;
  CHECK_THROWS_AS(train(m, split, cfg), ContractError);

  DatasetSplit ok = square_split(8, 4, 4, 10);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(m, ok, cfg), ContractError);
  cfg.batch_size = 4;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train(m, ok, cfg), ContractError);
}

TEST_CASE("a small model learns the square dataset") {
  const DatasetSplit split = square_split(60, 10, 10, 12);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 10;
  cfg.learning_rate = 2e-3;
  cfg.seed = 13;
  CnnModel m = CnnModel::build(square_config(), 14);
  const TrainReport report = train(m, split, cfg);
  REQUIRE(report.train_loss.size() == 6);
  CHECK(report.train_loss.back() < report.train_loss.front());

  const EvaluationResult result = evaluate(m, split.test);
  CHECK(result.metrics.accuracy >= 0.9);
  CHECK(result.confusion.total() == 10);
}

TEST_CASE("untrained symmetric model predicts the majority class share") {
  CnnModel m = CnnModel::build(square_config(), 15);
  for (auto& p : m.parameters()) {
    if (p.name.starts_with("dense2")) std::fill(p.tensor.storage().begin(), p.tensor.storage().end(), 0.0);
  }
  DatasetSplit split = square_split(8, 4, 6, 16);
  split.test.clear();
  for (int i = 0; i < 4; ++i) split.test.push_back(square_sample(true, 700 + i));
  for (int i = 0; i < 2; ++i) split.test.push_back(square_sample(false, 800 + i));

  const EvaluationResult result = evaluate(m, split.test);
  // all probabilities are exactly 0.5; threshold rule predicts the positive class
  for (double p : result.probs) CHECK(p == doctest::Approx(0.5));
  CHECK(result.metrics.accuracy == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("evaluate composes confusion, metrics and roc") {
  const DatasetSplit split = square_split(40, 8, 12, 17);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.learning_rate = 2e-3;
  cfg.seed = 18;
  CnnModel m = CnnModel::build(square_config(), 19);
  train(m, split, cfg);

  const EvaluationResult r = evaluate(m, split.test);
  CHECK(r.labels.size() == 12);
  CHECK(r.probs.size() == 12);
  CHECK(r.confusion.total() == 12);
  CHECK(r.roc.points.front().fpr == 0.0);
  CHECK(r.roc.auc >= 0.5);
  CHECK_THROWS_AS(evaluate(m, {}), ContractError);
}

TEST_CASE("report files carry the documented columns and fields") {
  TempDir dir("report");
  TrainReport report;
  report.train_loss = {0.7, 0.5};
  report.train_accuracy = {0.6, 0.8};
  report.val_loss = {0.71, 0.52};
  report.val_accuracy = {0.55, 0.75};
  write_train_report_csv(dir.file("train.csv"), report);

  std::ifstream csv(dir.file("train.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "epoch,train_loss,train_acc,val_loss,val_acc");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 2);
}
