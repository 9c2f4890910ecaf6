#pragma once

#include <array>
#include <vector>

#include "xaikit/cam.hpp"
#include "xaikit/lime.hpp"
#include "xaikit/tensor.hpp"

namespace xaikit {

// 5-anchor piecewise-linear colormap: blue, cyan, green, yellow, red at
// t = 0, 0.25, 0.5, 0.75, 1.
std::array<double, 3> heat_color(double t);

// Colormapped heatmap alpha-blended over the image:
//   out = (1 - alpha) * image + alpha * colormap(heat).
// MRI inputs carry the same value on all three channels, so the base is the
// grayscale image; alpha = 0 returns the input untouched. Returns [3,H,W].
Tensor render_overlay(const Tensor& image, const Heatmap& heatmap, double alpha = 0.5);

// Tints the top regions by |weight| green (positive) or red (negative) and
// draws their boundaries in the saturated color; everything else is left
// untouched. Returns [3,H,W].
Tensor render_lime_overlay(const Tensor& image, const SuperpixelMap& segments, const LimeExplanation& explanation,
                           int top_regions);

// Horizontal strip of equally sized [3,H,W] images (the figure-panel layout).
Tensor compose_panel(const std::vector<Tensor>& images);

}  // namespace xaikit
