#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xaikit/tensor.hpp"
#include "xaikit/xai_model.hpp"

namespace xaikit {

// A per-pixel relevance map over the input, normalized to [0,1] via
// (v - min)/(max - min); an all-equal raw map normalizes to all zeros.
struct Heatmap {
  Tensor values;  // [H,W]
  std::string method;
  int target_class = 0;
  double raw_min = 0.0;  // range of the map before normalization
  double raw_max = 0.0;
};

struct CamConfig {
  std::string target_layer;  // empty selects the model's last conv layer
  int smoothgrad_samples = 25;
  double smoothgrad_sigma_fraction = 0.15;
  int scorecam_top_k = 10;
  int classmodel_steps = 200;
  double classmodel_lambda = 0.01;
  double classmodel_step_size = 1.0;
  std::uint64_t seed = 0;
};

// (v - min)/(max - min); all-equal input maps to all zeros.
Tensor normalize_unit(const Tensor& raw, double* raw_min = nullptr, double* raw_max = nullptr);

// Gradient of the class score w.r.t. the input; relevance is the per-pixel
// maximum over channels of |gradient|.
Heatmap vanilla_saliency(const GradientModel& model, const Tensor& image, int target_class);

// Gradient ascent from the zero image on score - lambda*||I||^2. The returned
// image is clipped to [0,1] for display; `objective_curve`, when given,
// receives the objective value after every step.
Tensor class_model_visualization(const GradientModel& model, int target_class, const Shape& input_shape,
                                 const CamConfig& config, std::vector<double>* objective_curve = nullptr);

// Mean of the raw saliency maps of N Gaussian-perturbed copies, normalized
// once at the end. sigma = sigma_fraction * (max(image) - min(image));
// sigma = 0 reproduces vanilla_saliency exactly.
Heatmap smoothgrad(const GradientModel& model, const Tensor& image, int target_class, const CamConfig& config);

// ReLU of the activation channels weighted by the spatial mean of the class
// score gradient, upsampled to the input size and normalized.
Heatmap grad_cam(const GradientModel& model, const Tensor& image, int target_class, const std::string& layer);

// Channel weights from the closed-form first-derivative powers
//   w = g^2 / (2 g^2 + sum_xy(A) * g^3),   zero denominators -> 0,
//   alpha_i = sum_xy w * ReLU(g).
Heatmap grad_cam_pp(const GradientModel& model, const Tensor& image, int target_class, const std::string& layer);

// Gradient-free CAM: each channel's normalized upsampled activation masks the
// input, channel weight = softmax over the Channel-wise Increase of
// Confidence against the zero baseline.
Heatmap score_cam(const ForwardModel& model, const Tensor& image, int target_class, const std::string& layer);

// Score-CAM restricted to the top_k channels by spatial activation variance.
// top_k = channel count reproduces score_cam exactly.
Heatmap faster_score_cam(const ForwardModel& model, const Tensor& image, int target_class, const std::string& layer,
                         int top_k);

// Channel order used by faster_score_cam: descending spatial variance, ties
// broken by the lower channel index.
std::vector<std::size_t> rank_channels_by_variance(const Tensor& activation);

// Sidecar JSON ({method, target_class, layer, config, min, max}) written next
// to each rendered overlay.
void write_heatmap_sidecar(const std::string& path, const Heatmap& heatmap, const std::string& layer,
                           const CamConfig& config);

}  // namespace xaikit
