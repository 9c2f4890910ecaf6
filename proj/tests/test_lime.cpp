#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"
#include "xaikit/lime.hpp"

using namespace xaikit;

namespace {

// 4-connectivity check per region via flood fill.
bool regions_connected(const SuperpixelMap& map) {
  const std::size_t h = map.height, w = map.width;
  std::vector<int> seen(h * w, 0);
  for (int r = 0; r < map.region_count; ++r) {
    std::size_t start = h * w;
    for (std::size_t p = 0; p < h * w; ++p) {
      if (map.labels[p] == r) {
        start = p;
        break;
      }
    }
    if (start == h * w) return false;  // label missing entirely
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    std::size_t count = 0;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const std::size_t y = p / w, x = p % w;
      const std::size_t neighbors[4] = {p >= w ? p - w : p, x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p,
                                        y + 1 < h ? p + w : p};
      for (std::size_t q : neighbors) {
        if (q != p && !seen[q] && map.labels[q] == r) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    std::size_t total = 0;
    for (std::size_t p = 0; p < h * w; ++p) {
      if (map.labels[p] == r) ++total;
    }
    if (count != total) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("constant image segments into the initial grid cells") {
  const Tensor image = Tensor::full({3, 12, 12}, 0.5);
  const SuperpixelMap map = segment_superpixels(image, 9, 1);
  CHECK(map.region_count == 9);
  // 3x3 grid of 4x4 cells
  for (std::size_t y = 0; y < 12; ++y)
    for (std::size_t x = 0; x < 12; ++x) {
      CHECK(map.at(y, x) == static_cast<int>((y / 4) * 3 + x / 4));
    }
}

TEST_CASE("single-region segmentation covers the image") {
  const SuperpixelMap map = segment_superpixels(Tensor::full({3, 7, 5}, 0.3), 1, 2);
  CHECK(map.region_count == 1);
  for (int label : map.labels) CHECK(label == 0);
}

TEST_CASE("left/right contrast splits along the midline") {
  Tensor image({3, 16, 16});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 8; x < 16; ++x) image(c, y, x) = 1.0;

  const SuperpixelMap map = segment_superpixels(image, 2, 3);
  REQUIRE(map.region_count == 2);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      // boundary within one pixel of the midline
      if (x <= 6) CHECK(map.at(y, x) == map.at(std::size_t{0}, std::size_t{0}));
      if (x >= 9) CHECK(map.at(y, x) == map.at(std::size_t{0}, std::size_t{15}));
    }
  CHECK(map.at(0, 0) != map.at(0, 15));
}

TEST_CASE("segmentation labels are contiguous, cover all pixels, connected, deterministic") {
  const Tensor image = testutil::random_tensor({3, 20, 14}, 7, 0.5);
  const SuperpixelMap a = segment_superpixels(image, 12, 5);
  const SuperpixelMap b = segment_superpixels(image, 12, 5);
  CHECK(a.labels == b.labels);

  std::set<int> used(a.labels.begin(), a.labels.end());
  CHECK(static_cast<int>(used.size()) == a.region_count);
  CHECK(*used.begin() == 0);
  CHECK(*used.rbegin() == a.region_count - 1);
  CHECK(regions_connected(a));
}

TEST_CASE("segmentation rejects degenerate inputs") {
  CHECK_THROWS_AS(segment_superpixels(Tensor({3, 4, 4}), 0, 1), ContractError);
  CHECK_THROWS_AS(segment_superpixels(Tensor({3, 4, 4}), 17, 1), ContractError);
}

TEST_CASE("apply_mask basics") {
  const Tensor image = testutil::random_tensor({3, 8, 8}, 11, 0.5);
  // hand-built quadrant map keeps this test independent of the segmenter
  SuperpixelMap map;
  map.height = map.width = 8;
  map.region_count = 4;
  map.labels.resize(64);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) map.labels[y * 8 + x] = static_cast<int>((y / 4) * 2 + x / 4);

  const std::vector<std::uint8_t> all_on(4, 1);
  CHECK(testutil::bitwise_equal(apply_mask(image, map, all_on, 0.0), image));

  const std::vector<std::uint8_t> all_off(4, 0);
  const Tensor filled = apply_mask(image, map, all_off, 0.25);
  for (std::size_t i = 0; i < filled.numel(); ++i) CHECK(filled[i] == 0.25);

  std::vector<std::uint8_t> one_off(4, 1);
  one_off[2] = 0;
  const Tensor partial = apply_mask(image, map, one_off, 0.0);
  const std::size_t hw = 64;
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (map.labels[p] == 2) {
        CHECK(partial[c * hw + p] == 0.0);
      } else {
        CHECK(partial[c * hw + p] == image[c * hw + p]);
      }
    }
  }

  CHECK_THROWS_AS(apply_mask(image, map, std::vector<std::uint8_t>(3, 1), 0.0), ContractError);
}

TEST_CASE("surrogate recovers an exactly linear black box with lambda zero") {
  // g(z) = 3 z1 - 2 z2 over the full factorial of two regions
  const std::vector<std::vector<std::uint8_t>> masks{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  std::vector<double> responses;
  for (const auto& m : masks) responses.push_back(3.0 * m[0] - 2.0 * m[1]);
  const std::vector<double> distances{0.3, 0.2, 0.2, 0.0};

  const LimeExplanation exp = fit_surrogate(masks, responses, distances, 0.5, 0.0);
  REQUIRE(exp.region_weights.size() == 2);
  double w0 = 0.0, w1 = 0.0;
  for (const auto& rw : exp.region_weights) (rw.region == 0 ? w0 : w1) = rw.weight;
  CHECK(w0 == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(w1 == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(exp.intercept == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(exp.r2 == doctest::Approx(1.0).epsilon(1e-9));
  // sorted by |weight| descending
  CHECK(exp.region_weights[0].region == 0);
}

TEST_CASE("a huge ridge penalty shrinks all coefficients toward zero") {
  const std::vector<std::vector<std::uint8_t>> masks{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  std::vector<double> responses{0.1, 0.9, 0.4, 0.8};
  const std::vector<double> distances{0.4, 0.1, 0.1, 0.0};
  const LimeExplanation exp = fit_surrogate(masks, responses, distances, 0.5, 1e9);
  for (const auto& rw : exp.region_weights) CHECK(std::abs(rw.weight) < 1e-6);
}

TEST_CASE("weighted three-sample case matches the normal-equations oracle") {
  const std::vector<std::vector<std::uint8_t>> masks{{1, 0}, {0, 1}, {1, 1}};
  const std::vector<double> responses{0.7, 0.2, 0.75};
  const std::vector<double> distances{0.5, 0.4, 0.0};
  const double kw = 0.6, lambda = 0.8;

  // oracle: build X = [1|z], W = diag(exp(-d^2/kw^2)), solve (X'WX + L)b = X'Wy
  std::vector<double> w(3);
  for (int i = 0; i < 3; ++i) w[i] = std::exp(-distances[i] * distances[i] / (kw * kw));
  const double X[3][3] = {{1, 1, 0}, {1, 0, 1}, {1, 1, 1}};
  std::vector<std::vector<double>> normal(3, std::vector<double>(3, 0.0));
  std::vector<double> rhs(3, 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 3; ++a) {
      rhs[a] += w[i] * X[i][a] * responses[i];
      for (int b = 0; b < 3; ++b) normal[a][b] += w[i] * X[i][a] * X[i][b];
    }
  }
  normal[1][1] += lambda;
  normal[2][2] += lambda;
  const std::vector<double> beta = oracle::solve_normal_equations(normal, rhs);

  const LimeExplanation exp = fit_surrogate(masks, responses, distances, kw, lambda);
  double w0 = 0.0, w1 = 0.0;
  for (const auto& rw : exp.region_weights) (rw.region == 0 ? w0 : w1) = rw.weight;
  CHECK(exp.intercept == doctest::Approx(beta[0]).epsilon(1e-9));
  CHECK(w0 == doctest::Approx(beta[1]).epsilon(1e-9));
  CHECK(w1 == doctest::Approx(beta[2]).epsilon(1e-9));
}

TEST_CASE("lambda zero on a deficient design names the rank defect") {
  // only one distinct row: intercept and region column are collinear
  const std::vector<std::vector<std::uint8_t>> masks{{1}, {1}, {1}};
  const std::vector<double> responses{0.5, 0.5, 0.5};
  const std::vector<double> distances{0.0, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(fit_surrogate(masks, responses, distances, 0.5, 0.0), doctest::Contains("rank"), SolverError);
}

TEST_CASE("ridge shrinkage is monotone in lambda") {
  const std::vector<std::vector<std::uint8_t>> masks{{0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {1, 1, 0},
                                                     {0, 1, 1}, {1, 0, 1}, {1, 1, 1}};
  std::vector<double> responses;
  for (const auto& m : masks) responses.push_back(0.2 + 0.5 * m[0] - 0.3 * m[1] + 0.1 * m[2]);
  std::vector<double> distances(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) distances[i] = mask_distance(masks[i]);

  double previous = std::numeric_limits<double>::infinity();
  for (const double lambda : {0.0, 0.1, 1.0, 10.0}) {
    const LimeExplanation exp = fit_surrogate(masks, responses, distances, 0.5, lambda);
    double norm = 0.0;
    for (const auto& rw : exp.region_weights) norm += rw.weight * rw.weight;
    norm = std::sqrt(norm);
    CHECK(norm <= previous + 1e-12);
    previous = norm;
  }
}

TEST_CASE("sample weights lie in (0,1] and the anchor mask gets weight one") {
  const std::vector<std::uint8_t> all_ones(9, 1);
  CHECK(mask_distance(all_ones) == 0.0);
  std::vector<std::uint8_t> partial(9, 0);
  partial[0] = partial[4] = 1;
  const double d = mask_distance(partial);
  CHECK(d > 0.0);
  CHECK(d < 1.0);
  CHECK(mask_distance(std::vector<std::uint8_t>(9, 0)) == 1.0);
}

TEST_CASE("explain_lime on a constant black box gives near-zero weights") {
  const Tensor image = testutil::random_tensor({3, 16, 16}, 21, 0.5);
  const PredictFn constant = [](const Tensor& batch) {
    Tensor out({batch.dim(0), 2});
    for (std::size_t i = 0; i < batch.dim(0); ++i) {
      out(i, std::size_t{0}) = 0.3;
      out(i, std::size_t{1}) = 0.7;
    }
    return out;
  };
  LimeConfig cfg;
  cfg.num_regions = 6;
  cfg.num_samples = 80;
  cfg.seed = 4;
  const LimeResult result = explain_lime(constant, image, 1, cfg);
  for (const auto& rw : result.explanation.region_weights) CHECK(std::abs(rw.weight) < 1e-6);
}

TEST_CASE("explain_lime finds the region the black box actually reads") {
  // black box = mean intensity of region 0's pixels (of channel 0)
  Tensor image = testutil::random_tensor({3, 12, 12}, 22, 0.5);
  for (std::size_t i = 0; i < image.numel(); ++i) image[i] = 0.6 + 0.4 * image[i];  // keep pixels positive
  const SuperpixelMap map = segment_superpixels(image, 9, 1);
  REQUIRE(map.region_count == 9);

  const PredictFn region_reader = [&](const Tensor& batch) {
    const std::size_t n = batch.dim(0), hw = 144;
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      long count = 0;
      for (std::size_t p = 0; p < hw; ++p) {
        if (map.labels[p] == 0) {
          mean += batch[i * 3 * hw + p];
          ++count;
        }
      }
      mean = 0.5 + mean / (2.0 * count);
      out(i, std::size_t{1}) = mean;
      out(i, std::size_t{0}) = 1.0 - mean;
    }
    return out;
  };

  LimeConfig cfg;
  cfg.num_regions = 9;
  cfg.num_samples = 300;
  cfg.seed = 9;
  const LimeResult result = explain_lime(region_reader, image, 1, cfg);
  REQUIRE_FALSE(result.explanation.region_weights.empty());
  CHECK(result.explanation.region_weights.front().region == 0);
  CHECK(result.explanation.region_weights.front().weight > 0.0);
  CHECK(std::abs(result.explanation.region_weights.front().weight) >
        5.0 * std::abs(result.explanation.region_weights[1].weight));
}

TEST_CASE("explain_lime is deterministic and evaluates exactly num_samples masked images") {
  const Tensor image = testutil::random_tensor({3, 10, 10}, 23, 0.5);
  std::size_t evaluated = 0;
  const PredictFn counter = [&evaluated](const Tensor& batch) {
    evaluated += batch.dim(0);
    Tensor out({batch.dim(0), 2});
    for (std::size_t i = 0; i < batch.dim(0); ++i) {
      double mean = 0.0;
      for (std::size_t j = 0; j < 300; ++j) mean += batch[i * 300 + j];
      out(i, std::size_t{1}) = mean / 300.0;
      out(i, std::size_t{0}) = 1.0 - out(i, std::size_t{1});
    }
    return out;
  };

  LimeConfig cfg;
  cfg.num_regions = 4;
  cfg.num_samples = 57;
  cfg.seed = 31;
  const LimeResult a = explain_lime(counter, image, 1, cfg);
  CHECK(evaluated == 57);

  const LimeResult b = explain_lime(counter, image, 1, cfg);
  REQUIRE(a.explanation.region_weights.size() == b.explanation.region_weights.size());
  for (std::size_t i = 0; i < a.explanation.region_weights.size(); ++i) {
    CHECK(a.explanation.region_weights[i].region == b.explanation.region_weights[i].region);
    CHECK(a.explanation.region_weights[i].weight == b.explanation.region_weights[i].weight);
  }
  CHECK(a.segments.labels == b.segments.labels);
}
