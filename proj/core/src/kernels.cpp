#include "xaikit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "xaikit/matmul.hpp"
#include "xaikit/random.hpp"

namespace xaikit::kernels {

namespace {

// Unpacks one image [C,H,W] into a [C*kh*kw, oh*ow] patch matrix.
void im2col(const double* img, const ConvDims& d, double* col) {
  const std::size_t ohow = d.oh * d.ow;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        double* row = col + ((c * d.kh + ky) * d.kw + kx) * ohow;
        const double* plane = img + c * d.h * d.w;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const double* src = plane + (oy * d.stride + ky) * d.w + kx;
          double* dst = row + oy * d.ow;
          if (d.stride == 1) {
            std::copy(src, src + d.ow, dst);
          } else {
            for (std::size_t ox = 0; ox < d.ow; ++ox) dst[ox] = src[ox * d.stride];
          }
        }
      }
    }
  }
}

// Scatter-adds a patch matrix back onto the image. Runs single threaded per
// image; overlapping windows would race otherwise.
void col2im_add(const double* col, const ConvDims& d, double* img) {
  const std::size_t ohow = d.oh * d.ow;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        const double* row = col + ((c * d.kh + ky) * d.kw + kx) * ohow;
        double* plane = img + c * d.h * d.w;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          double* dst = plane + (oy * d.stride + ky) * d.w + kx;
          const double* src = row + oy * d.ow;
          for (std::size_t ox = 0; ox < d.ow; ++ox) dst[ox * d.stride] += src[ox];
        }
      }
    }
  }
}

}  // namespace

ConvDims conv2d_dims(const Shape& input, const Shape& kernels, std::size_t stride) {
  if (input.size() != 4) throw DimensionError("conv2d input must be [N,C,H,W]");
  if (kernels.size() != 4) throw DimensionError("conv2d kernels must be [F,C,kh,kw]");
  if (stride < 1) throw ContractError("conv2d stride must be positive");
  ConvDims d{};
  d.n = input[0];
  d.c = input[1];
  d.h = input[2];
  d.w = input[3];
  d.f = kernels[0];
  d.kh = kernels[2];
  d.kw = kernels[3];
  d.stride = stride;
  if (kernels[1] != d.c) {
    throw DimensionError("conv2d kernel channels " + std::to_string(kernels[1]) + " do not match input channels " +
                         std::to_string(d.c));
  }
  if (d.kh > d.h || d.kw > d.w) throw DimensionError("conv2d kernel larger than input");
  d.oh = (d.h - d.kh) / stride + 1;
  d.ow = (d.w - d.kw) / stride + 1;
  return d;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
  const ConvDims d = conv2d_dims(input.shape(), kernels.shape(), stride);
  if (bias.shape() != Shape{d.f}) throw DimensionError("conv2d bias must be [F]");

  Tensor out({d.n, d.f, d.oh, d.ow});
  const std::size_t ckk = d.c * d.kh * d.kw;
  const std::size_t ohow = d.oh * d.ow;
  std::vector<double> col(ckk * ohow);
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(input.data() + n * d.c * d.h * d.w, d, col.data());
    double* o = out.data() + n * d.f * ohow;
    gemm_nn(d.f, ckk, ohow, 1.0, kernels.data(), col.data(), 0.0, o);
    for (std::size_t f = 0; f < d.f; ++f) {
      const double b = bias[f];
      if (b == 0.0) continue;
      double* plane = o + f * ohow;
      for (std::size_t i = 0; i < ohow; ++i) plane[i] += b;
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernels, std::size_t stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernels, Tensor* grad_bias) {
  const ConvDims d = conv2d_dims(input.shape(), kernels.shape(), stride);
  const std::size_t ckk = d.c * d.kh * d.kw;
  const std::size_t ohow = d.oh * d.ow;

  std::vector<double> col(ckk * ohow);
  std::vector<double> dcol(grad_input ? ckk * ohow : 0);
  for (std::size_t n = 0; n < d.n; ++n) {
    const double* go = grad_out.data() + n * d.f * ohow;
    if (grad_kernels || grad_input) im2col(input.data() + n * d.c * d.h * d.w, d, col.data());
    if (grad_kernels) {
      gemm_nt(d.f, ohow, ckk, 1.0, go, col.data(), 1.0, grad_kernels->data());
    }
    if (grad_input) {
      gemm_tn(ckk, d.f, ohow, 1.0, kernels.data(), go, 0.0, dcol.data());
      col2im_add(dcol.data(), d, grad_input->data() + n * d.c * d.h * d.w);
    }
    if (grad_bias) {
      for (std::size_t f = 0; f < d.f; ++f) {
        const double* plane = go + f * ohow;
        double acc = 0.0;
        for (std::size_t i = 0; i < ohow; ++i) acc += plane[i];
        (*grad_bias)[f] += acc;
      }
    }
  }
}

Tensor maxpool2_forward(const Tensor& input, std::vector<std::uint32_t>* argmax) {
  if (input.rank() != 4) throw DimensionError("maxpool2 input must be [N,C,H,W]");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) throw DimensionError("maxpool2 input smaller than window");
  if (input.numel() > std::numeric_limits<std::uint32_t>::max()) throw ContractError("maxpool2 input too large");

  Tensor out({n, c, oh, ow});
  if (argmax) argmax->assign(out.numel(), 0);
  const double* in = input.data();
  double* o = out.data();
  std::size_t oi = 0;
  for (std::size_t img = 0; img < n; ++img) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* plane = in + (img * c + ch) * h * w;
      const std::size_t base = (img * c + ch) * h * w;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox, ++oi) {
          const std::size_t y = oy * 2, x = ox * 2;
          double best = plane[y * w + x];
          std::size_t besti = y * w + x;
          const std::size_t cand[3] = {y * w + x + 1, (y + 1) * w + x, (y + 1) * w + x + 1};
          for (std::size_t k = 0; k < 3; ++k) {
            if (plane[cand[k]] > best) {
              best = plane[cand[k]];
              besti = cand[k];
            }
          }
          o[oi] = best;
          if (argmax) (*argmax)[oi] = static_cast<std::uint32_t>(base + besti);
        }
      }
    }
  }
  return out;
}

void maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax, const Tensor& grad_out,
                       Tensor* grad_input) {
  if (grad_input->shape() != input_shape) throw DimensionError("maxpool2 backward shape mismatch");
  for (std::size_t i = 0; i < grad_out.numel(); ++i) {
    (*grad_input)[argmax[i]] += grad_out[i];
  }
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() != 2 || weights.rank() != 2) throw DimensionError("dense expects [N,D] x [D,M]");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weights.dim(1);
  if (weights.dim(0) != d) {
    throw DimensionError("dense inner dimensions disagree: " + std::to_string(d) + " vs " +
                         std::to_string(weights.dim(0)));
  }
  if (bias.shape() != Shape{m}) throw DimensionError("dense bias must be [M]");
  Tensor out({n, m});
  gemm_nn(n, d, m, 1.0, input.data(), weights.data(), 0.0, out.data());
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] += bias[j];
  }
  return out;
}

void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, Tensor* grad_input,
                    Tensor* grad_weights, Tensor* grad_bias) {
  const std::size_t n = input.dim(0), d = input.dim(1), m = weights.dim(1);
  if (grad_input) gemm_nt(n, m, d, 1.0, grad_out.data(), weights.data(), 1.0, grad_input->data());
  if (grad_weights) gemm_tn(d, n, m, 1.0, input.data(), grad_out.data(), 1.0, grad_weights->data());
  if (grad_bias) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = grad_out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) (*grad_bias)[j] += row[j];
    }
  }
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return out;
}

void relu_backward(const Tensor& input, const Tensor& grad_out, Tensor* grad_input) {
  for (std::size_t i = 0; i < input.numel(); ++i) {
    if (input[i] > 0.0) (*grad_input)[i] += grad_out[i];
  }
}

Tensor softmax_rows(const Tensor& input) {
  if (input.rank() != 2) throw DimensionError("softmax expects [N,K]");
  const std::size_t n = input.dim(0), k = input.dim(1);
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = input.data() + i * k;
    double* o = out.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      o[j] = std::exp(row[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= z;
  }
  return out;
}

void softmax_backward(const Tensor& output, const Tensor& grad_out, Tensor* grad_input) {
  const std::size_t n = output.dim(0), k = output.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = output.data() + i * k;
    const double* g = grad_out.data() + i * k;
    double* gi = grad_input->data() + i * k;
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += g[j] * p[j];
    for (std::size_t j = 0; j < k; ++j) gi[j] += p[j] * (g[j] - dot);
  }
}

Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must be in [0,1)");
  Tensor mask(shape);
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  }
  return mask;
}

}  // namespace xaikit::kernels
