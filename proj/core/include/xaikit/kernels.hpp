#pragma once

#include <cstdint>
#include <vector>

#include "xaikit/tensor.hpp"

// Raw layer kernels shared by the autodiff graph and the forward-only paths
// (inference, Score-CAM, LIME). None of them touch gradients unless a
// *_backward function is called explicitly.

namespace xaikit::kernels {

struct ConvDims {
  std::size_t n, c, h, w;    // input
  std::size_t f, kh, kw;     // kernels
  std::size_t stride;
  std::size_t oh, ow;        // valid-convolution output
};

// Validates shapes (valid convolution, no padding) and derives the output
// geometry. Throws DimensionError on channel or size mismatches.
ConvDims conv2d_dims(const Shape& input, const Shape& kernels, std::size_t stride);

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride);

// Accumulates (+=) into the gradient tensors, which must be pre-shaped.
void conv2d_backward(const Tensor& input, const Tensor& kernels, std::size_t stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernels, Tensor* grad_bias);

// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
// argmax, when given, receives the flat input offset of each window maximum
// (first in row-major order on ties).
Tensor maxpool2_forward(const Tensor& input, std::vector<std::uint32_t>* argmax = nullptr);
void maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax, const Tensor& grad_out,
                       Tensor* grad_input);

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, Tensor* grad_input,
                    Tensor* grad_weights, Tensor* grad_bias);

Tensor relu_forward(const Tensor& input);
void relu_backward(const Tensor& input, const Tensor& grad_out, Tensor* grad_input);

// Row-wise softmax with max subtraction; rows sum to 1 within 1e-6.
Tensor softmax_rows(const Tensor& input);
void softmax_backward(const Tensor& output, const Tensor& grad_out, Tensor* grad_input);

// Inverted dropout mask: each element is 0 with probability `rate`, else
// 1/(1-rate). Multiplying by the mask is both the forward and backward map.
Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed);

}  // namespace xaikit::kernels
