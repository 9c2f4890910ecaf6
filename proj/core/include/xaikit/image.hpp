#pragma once

#include <string>

#include "xaikit/tensor.hpp"

namespace xaikit {

// Decodes a PNG or JPEG file into a [3,H,W] tensor of reals in [0,1]
// (8-bit value v maps to v/255). Grayscale sources are replicated across the
// three channels. Throws IngestError naming the path on failure.
Tensor load_image(const std::string& path);

// Encodes a [3,H,W] or [H,W] tensor in [0,1] as an 8-bit PNG / JPEG.
void write_png(const std::string& path, const Tensor& image);
void write_jpeg(const std::string& path, const Tensor& image, int quality = 92);

// Bilinear resize with half-pixel centers: the source coordinate for output
// index d is (d + 0.5) * in/out - 0.5, clamped to [0, in-1]. Accepts [C,H,W]
// or [H,W]; preserves rank.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

}  // namespace xaikit
