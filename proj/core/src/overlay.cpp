#include "xaikit/overlay.hpp"

#include <algorithm>
#include <cmath>

namespace xaikit {

std::array<double, 3> heat_color(double t) {
  static constexpr std::array<std::array<double, 3>, 5> anchors{{
      {0.0, 0.0, 1.0},  // blue
      {0.0, 1.0, 1.0},  // cyan
      {0.0, 1.0, 0.0},  // green
      {1.0, 1.0, 0.0},  // yellow
      {1.0, 0.0, 0.0},  // red
  }};
  t = std::min(1.0, std::max(0.0, t));
  const double scaled = t * 4.0;
  const std::size_t seg = std::min<std::size_t>(3, static_cast<std::size_t>(scaled));
  const double frac = scaled - static_cast<double>(seg);
  std::array<double, 3> rgb;
  for (std::size_t c = 0; c < 3; ++c) {
    rgb[c] = anchors[seg][c] + (anchors[seg + 1][c] - anchors[seg][c]) * frac;
  }
  return rgb;
}

namespace {

void check_image_dims(const Tensor& image, std::size_t h, std::size_t w, const char* what) {
  const bool ok = (image.rank() == 3 && image.dim(0) == 3 && image.dim(1) == h && image.dim(2) == w) ||
                  (image.rank() == 2 && image.dim(0) == h && image.dim(1) == w);
  if (!ok) throw DimensionError(std::string(what) + ": image and map dimensions disagree");
}

double channel_value(const Tensor& image, std::size_t c, std::size_t y, std::size_t x) {
  return image.rank() == 3 ? image(c, y, x) : image(y, x);
}

}  // namespace

Tensor render_overlay(const Tensor& image, const Heatmap& heatmap, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw ContractError("overlay alpha must be in [0,1]");
  const std::size_t h = heatmap.values.dim(0), w = heatmap.values.dim(1);
  check_image_dims(image, h, w, "render_overlay");

  Tensor out({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto rgb = heat_color(heatmap.values(y, x));
      for (std::size_t c = 0; c < 3; ++c) {
        out(c, y, x) = (1.0 - alpha) * channel_value(image, c, y, x) + alpha * rgb[c];
      }
    }
  }
  return out;
}

Tensor render_lime_overlay(const Tensor& image, const SuperpixelMap& segments, const LimeExplanation& explanation,
                           int top_regions) {
  if (top_regions < 0 || top_regions > segments.region_count) {
    throw ContractError("top_regions must be in [0, region count]");
  }
  const std::size_t h = segments.height, w = segments.width;
  check_image_dims(image, h, w, "render_lime_overlay");

  // sign per selected region: +1 green, -1 red, 0 untouched
  std::vector<int> sign(segments.region_count, 0);
  const std::size_t take = std::min<std::size_t>(top_regions, explanation.region_weights.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto& rw = explanation.region_weights[i];
    sign[rw.region] = rw.weight >= 0.0 ? 1 : -1;
  }

  Tensor out({3, h, w});
  constexpr double kTint = 0.4;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const int label = segments.at(y, x);
      double rgb[3] = {channel_value(image, 0, y, x), channel_value(image, 1, y, x), channel_value(image, 2, y, x)};
      if (sign[label] != 0) {
        const bool boundary = (y > 0 && segments.at(y - 1, x) != label) || (x > 0 && segments.at(y, x - 1) != label) ||
                              (y + 1 < h && segments.at(y + 1, x) != label) ||
                              (x + 1 < w && segments.at(y, x + 1) != label);
        const double color[3] = {sign[label] < 0 ? 1.0 : 0.0, sign[label] > 0 ? 1.0 : 0.0, 0.0};
        const double blend = boundary ? 1.0 : kTint;
        for (std::size_t c = 0; c < 3; ++c) rgb[c] = (1.0 - blend) * rgb[c] + blend * color[c];
      }
      for (std::size_t c = 0; c < 3; ++c) out(c, y, x) = rgb[c];
    }
  }
  return out;
}

Tensor compose_panel(const std::vector<Tensor>& images) {
  if (images.empty()) throw ContractError("compose_panel needs at least one image");
  const std::size_t h = images.front().rank() == 3 ? images.front().dim(1) : images.front().dim(0);
  const std::size_t w = images.front().rank() == 3 ? images.front().dim(2) : images.front().dim(1);
  for (const auto& img : images) check_image_dims(img, h, w, "compose_panel");

  const std::size_t gap = 2;
  const std::size_t total_w = images.size() * w + (images.size() - 1) * gap;
  Tensor out = Tensor::full({3, h, total_w}, 1.0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::size_t x0 = i * (w + gap);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t c = 0; c < 3; ++c) out(c, y, x0 + x) = channel_value(images[i], c, y, x);
      }
    }
  }
  return out;
}

}  // namespace xaikit
