#pragma once

#include <string>
#include <utility>

#include "xaikit/tensor.hpp"

namespace xaikit {

// What the gradient-based explanation methods need from a model: the target
// class score (pre-softmax logit) and its gradients. Toy scorers in tests
// implement this directly.
class GradientModel {
 public:
  virtual ~GradientModel() = default;

  virtual int num_classes() const = 0;

  // Score of `cls` on one [C,H,W] image and its gradient w.r.t. the image.
  virtual std::pair<double, Tensor> class_score_grad(const Tensor& image, int cls) const = 0;

  // Activation A [F,h,w] of a named layer plus d(score)/dA for `cls`.
  struct LayerTap {
    Tensor activation;
    Tensor grad;
  };
  virtual LayerTap layer_score_grad(const Tensor& image, int cls, const std::string& layer) const = 0;
};

// The forward-only surface: enough for Score-CAM and LIME, with no way to
// reach a gradient.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  virtual int num_classes() const = 0;

  // Class probabilities [N,K] for a batch [N,C,H,W].
  virtual Tensor predict(const Tensor& batch) const = 0;

  // Activation [F,h,w] of a named layer for one [C,H,W] image.
  virtual Tensor layer_activation(const Tensor& image, const std::string& layer) const = 0;
};

}  // namespace xaikit
