#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xaikit/tensor.hpp"

namespace xaikit {

// One labeled image: pixels in [0,1], [3,H,W]; label 1 = Tumor, 0 = No-Tumor.
struct ImageSample {
  Tensor pixels;
  int label = 0;
  std::string source_path;
};

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<ImageSample> train;
  std::vector<ImageSample> validation;
  std::vector<ImageSample> test;
  std::uint64_t seed = 0;
};

// Loads `<root>/yes/*` as label 1 and `<root>/no/*` as label 0, resizing every
// image to target_h x target_w. Files are visited in sorted order so ingestion
// is deterministic. Throws IngestError if a class directory is missing/empty.
std::vector<ImageSample> load_dataset_dir(const std::string& root, std::size_t target_h, std::size_t target_w);

// Stratified shuffle-and-cut. Per class: shuffle with the seeded RNG, then
// train = floor(r_train*N), validation = round-half-down(r_val*N), test = the
// remainder. This is the rounding rule that reproduces the published
// 80/10/10 splits, including N=155 -> (124, 15, 16).
DatasetSplit split_dataset(const std::vector<ImageSample>& samples, const SplitRatios& ratios, std::uint64_t seed);

// Per-class split sizes for the rule above, exposed for tests and reporting.
struct SplitCounts {
  std::size_t train, validation, test;
};
SplitCounts split_counts(std::size_t class_size, const SplitRatios& ratios);

// JSON manifest with the source paths of each part, for exact replay.
void write_split_manifest(const std::string& path, const DatasetSplit& split, const SplitRatios& ratios);

// Rebuilds a split from a manifest, drawing pixel data from `samples`
// (matched by source path). Throws IngestError on unknown paths.
DatasetSplit load_split_manifest(const std::string& path, const std::vector<ImageSample>& samples);

}  // namespace xaikit
