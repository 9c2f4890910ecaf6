#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xaikit/tensor.hpp"

namespace xaikit {

// Superpixel labeling of an image: every pixel carries a region id in
// [0, region_count), ids are contiguous and each region is 4-connected.
struct SuperpixelMap {
  std::vector<int> labels;  // row-major, height*width entries
  std::size_t height = 0;
  std::size_t width = 0;
  int region_count = 0;

  int at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
};

struct LimeConfig {
  int num_regions = 50;
  int num_samples = 1000;
  double kernel_width = 0.0;  // <= 0 selects the default 0.25 * sqrt(R)
  double ridge_lambda = 1.0;
  int top_regions = 5;
  double fill_value = 0.0;  // black; what "absent" regions become
  std::uint64_t seed = 0;
};

struct RegionWeight {
  int region;
  double weight;
};

// Signed per-region attributions, sorted by |weight| descending.
struct LimeExplanation {
  std::vector<RegionWeight> region_weights;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Black-box class probabilities for a batch [N,C,H,W] -> [N,K].
using PredictFn = std::function<Tensor(const Tensor&)>;

// Grid-initialized local k-means (SLIC style) over (intensity*scale, x, y)
// features, 10 iterations, then orphan components are merged into adjacent
// regions. num_regions is a target; the achieved count is in the result.
// Deterministic for a fixed seed.
SuperpixelMap segment_superpixels(const Tensor& image, int num_regions, std::uint64_t seed);

// Pixels of regions with mask bit 0 are replaced by fill_value.
Tensor apply_mask(const Tensor& image, const SuperpixelMap& segments, std::span<const std::uint8_t> mask,
                  double fill_value);

// Weighted ridge regression of the responses on the mask bits, intercept
// unpenalized; sample weights are exp(-d^2 / kernel_width^2). Throws
// SolverError when lambda = 0 and the system is singular.
LimeExplanation fit_surrogate(const std::vector<std::vector<std::uint8_t>>& masks, std::span<const double> responses,
                              std::span<const double> distances, double kernel_width, double ridge_lambda);

struct LimeResult {
  LimeExplanation explanation;
  SuperpixelMap segments;
};

// Segment, draw num_samples Bernoulli(0.5) masks (the first is always the
// all-ones anchor), evaluate the black box on the masked images and fit the
// surrogate. Deterministic given the seed.
LimeResult explain_lime(const PredictFn& model, const Tensor& image, int target_class, const LimeConfig& config);

// Cosine distance of a binary mask from the all-ones mask.
double mask_distance(std::span<const std::uint8_t> mask);

void write_lime_sidecar(const std::string& path, const LimeExplanation& explanation, const LimeConfig& config);

}  // namespace xaikit
