#include <algorithm>
#include <set>

#include "doctest.h"
#include "test_support.hpp"
#include "xaikit/dataset.hpp"
#include "xaikit/image.hpp"

using namespace xaikit;
using testutil::TempDir;

namespace {

// Synthetic samples with distinct paths; pixel payload is irrelevant here.
std::vector<ImageSample> synthetic_samples(std::size_t positives, std::size_t negatives) {
  std::vector<ImageSample> samples;
  for (std::size_t i = 0; i < negatives; ++i)
    samples.push_back({Tensor({3, 1, 1}), 0, "no/" + std::to_string(i) + ".png"});
  for (std::size_t i = 0; i < positives; ++i)
    samples.push_back({Tensor({3, 1, 1}), 1, "yes/" + std::to_string(i) + ".png"});
  return samples;
}

std::size_t count_label(const std::vector<ImageSample>& part, int label) {
  return std::count_if(part.begin(), part.end(), [&](const ImageSample& s) { return s.label == label; });
}

}  // namespace

TEST_CASE("published per-class split counts reproduce exactly") {
  const SplitRatios ratios;
  SUBCASE("balanced dataset class of 1500") {
    const SplitCounts c = split_counts(1500, ratios);
    CHECK(c.train == 1200);
    CHECK(c.validation == 150);
    CHECK(c.test == 150);
  }
  SUBCASE("imbalanced Tumor class of 155") {
    const SplitCounts c = split_counts(155, ratios);
    CHECK(c.train == 124);
    CHECK(c.validation == 15);
    CHECK(c.test == 16);
  }
  SUBCASE("imbalanced No-Tumor class of 98") {
    const SplitCounts c = split_counts(98, ratios);
    CHECK(c.train == 78);
    CHECK(c.validation == 10);
    CHECK(c.test == 10);
  }
}

TEST_CASE("split is stratified, disjoint and exhaustive") {
  const auto samples = synthetic_samples(155, 98);
  const DatasetSplit split = split_dataset(samples, SplitRatios{}, 42);

  CHECK(count_label(split.train, 1) == 124);
  CHECK(count_label(split.validation, 1) == 15);
  CHECK(count_label(split.test, 1) == 16);
  CHECK(count_label(split.train, 0) == 78);
  CHECK(count_label(split.validation, 0) == 10);
  CHECK(count_label(split.test, 0) == 10);

  std::set<std::string> seen;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& s : *part) {
      CHECK(seen.insert(s.source_path).second);  // disjoint
    }
  }
  CHECK(seen.size() == samples.size());  // exhaustive
}

TEST_CASE("identical seeds give identical splits, different seeds permute membership") {
  const auto samples = synthetic_samples(40, 60);
  const DatasetSplit a = split_dataset(samples, SplitRatios{}, 7);
  const DatasetSplit b = split_dataset(samples, SplitRatios{}, 7);
  const DatasetSplit c = split_dataset(samples, SplitRatios{}, 8);

  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].source_path == b.train[i].source_path);

  CHECK(c.train.size() == a.train.size());
  CHECK(c.validation.size() == a.validation.size());
  CHECK(c.test.size() == a.test.size());
  bool any_difference = false;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    if (a.train[i].source_path != c.train[i].source_path) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("split rejects bad ratios and empty classes") {
  const auto samples = synthetic_samples(4, 4);
  CHECK_THROWS_AS(split_dataset(samples, SplitRatios{0.5, 0.2, 0.2}, 1), ContractError);
  CHECK_THROWS_AS(split_dataset({}, SplitRatios{}, 1), ContractError);
}

TEST_CASE("directory ingestion maps yes/no to labels and resizes") {
  TempDir dir("ingest");
  std::filesystem::create_directories(dir.path() / "yes");
  std::filesystem::create_directories(dir.path() / "no");
  write_png((dir.path() / "yes" / "a.png").string(), Tensor::full({3, 5, 4}, 1.0));
  write_png((dir.path() / "yes" / "b.png").string(), Tensor::full({3, 8, 8}, 0.5));
  write_png((dir.path() / "no" / "c.png").string(), Tensor({3, 8, 8}));

  const auto samples = load_dataset_dir(dir.path().string(), 8, 8);
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].label == 0);
  CHECK(samples[1].label == 1);
  CHECK(samples[2].label == 1);
  for (const auto& s : samples) CHECK(s.pixels.shape() == Shape{3, 8, 8});

  CHECK_THROWS_AS(load_dataset_dir((dir.path() / "nowhere").string(), 8, 8), IngestError);
}

TEST_CASE("split manifest round trips") {
  TempDir dir("manifest");
  const auto samples = synthetic_samples(12, 9);
  const DatasetSplit split = split_dataset(samples, SplitRatios{}, 3);
  write_split_manifest(dir.file("split.json"), split, SplitRatios{});

  const DatasetSplit replay = load_split_manifest(dir.file("split.json"), samples);
  CHECK(replay.seed == split.seed);
  REQUIRE(replay.test.size() == split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    CHECK(replay.test[i].source_path == split.test[i].source_path);
  }

  CHECK_THROWS_AS(load_split_manifest(dir.file("split.json"), synthetic_samples(1, 1)), IngestError);
}
