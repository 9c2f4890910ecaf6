#include "xaikit/cam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "xaikit/image.hpp"
#include "xaikit/random.hpp"

using nlohmann::json;

namespace xaikit {

namespace {

constexpr std::uint64_t kSmoothgradStream = 0x56AD;

void check_class(const GradientModel& model, int cls) {
  if (cls < 0 || cls >= model.num_classes()) throw ContractError("class index out of range");
}

// Max over channels of |grad|, the raw (un-normalized) saliency map.
Tensor saliency_raw(const Tensor& grad) {
  if (grad.rank() == 2) {
    Tensor out = grad;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
    return out;
  }
  const std::size_t c = grad.dim(0), h = grad.dim(1), w = grad.dim(2);
  Tensor out({h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = grad.data() + ch * h * w;
    for (std::size_t i = 0; i < h * w; ++i) out[i] = std::max(out[i], std::abs(plane[i]));
  }
  return out;
}

Heatmap finish(Tensor raw, const char* method, int cls) {
  Heatmap hm;
  hm.method = method;
  hm.target_class = cls;
  hm.values = normalize_unit(raw, &hm.raw_min, &hm.raw_max);
  return hm;
}

std::pair<std::size_t, std::size_t> spatial_dims(const Tensor& image) {
  if (image.rank() == 3) return {image.dim(1), image.dim(2)};
  if (image.rank() == 2) return {image.dim(0), image.dim(1)};
  throw DimensionError("expected a [C,H,W] or [H,W] image");
}

}  // namespace

Tensor normalize_unit(const Tensor& raw, double* raw_min, double* raw_max) {
  const double lo = raw.min(), hi = raw.max();
  if (raw_min) *raw_min = lo;
  if (raw_max) *raw_max = hi;
  Tensor out(raw.shape());
  if (hi > lo) {
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < raw.numel(); ++i) out[i] = (raw[i] - lo) * inv;
  }
  return out;
}

Heatmap vanilla_saliency(const GradientModel& model, const Tensor& image, int target_class) {
  check_class(model, target_class);
  const auto [score, grad] = model.class_score_grad(image, target_class);
  (void)score;
  return finish(saliency_raw(grad), "saliency", target_class);
}

Tensor class_model_visualization(const GradientModel& model, int target_class, const Shape& input_shape,
                                 const CamConfig& config, std::vector<double>* objective_curve) {
  check_class(model, target_class);
  if (config.classmodel_steps < 0) throw ContractError("classmodel_steps must be nonnegative");
  Tensor synth(input_shape);
  for (int step = 0; step < config.classmodel_steps; ++step) {
    const auto [score, grad] = model.class_score_grad(synth, target_class);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < synth.numel(); ++i) norm_sq += synth[i] * synth[i];
    if (objective_curve) objective_curve->push_back(score - config.classmodel_lambda * norm_sq);
    for (std::size_t i = 0; i < synth.numel(); ++i) {
      synth[i] += config.classmodel_step_size * (grad[i] - 2.0 * config.classmodel_lambda * synth[i]);
    }
  }
  for (std::size_t i = 0; i < synth.numel(); ++i) synth[i] = std::min(1.0, std::max(0.0, synth[i]));
  return synth;
}

Heatmap smoothgrad(const GradientModel& model, const Tensor& image, int target_class, const CamConfig& config) {
  check_class(model, target_class);
  if (config.smoothgrad_samples < 1) throw ContractError("smoothgrad needs at least one sample");
  if (config.smoothgrad_sigma_fraction < 0.0) throw ContractError("smoothgrad sigma fraction must be nonnegative");

  const double sigma = config.smoothgrad_sigma_fraction * (image.max() - image.min());
  if (sigma == 0.0) {
    // Every perturbation is the image itself; the mean of identical raw maps
    // is that map, so this equals vanilla saliency exactly for any N.
    Heatmap hm = vanilla_saliency(model, image, target_class);
    hm.method = "smoothgrad";
    return hm;
  }

  const std::size_t n = static_cast<std::size_t>(config.smoothgrad_samples);
  Tensor accum;
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng(derive_seed(config.seed, kSmoothgradStream, s));
    Tensor noisy = image;
    for (std::size_t i = 0; i < noisy.numel(); ++i) noisy[i] += sigma * rng.normal();
    const auto [score, grad] = model.class_score_grad(noisy, target_class);
    (void)score;
    Tensor raw = saliency_raw(grad);
    if (s == 0) {
      accum = std::move(raw);
    } else {
      for (std::size_t i = 0; i < accum.numel(); ++i) accum[i] += raw[i];
    }
  }
  for (std::size_t i = 0; i < accum.numel(); ++i) accum[i] /= static_cast<double>(n);
  return finish(std::move(accum), "smoothgrad", target_class);
}

namespace {

Heatmap cam_from_weights(const Tensor& activation, const std::vector<double>& channel_weights, std::size_t out_h,
                         std::size_t out_w, const char* method, int cls) {
  const std::size_t f = activation.dim(0), h = activation.dim(1), w = activation.dim(2);
  Tensor combined({h, w});
  for (std::size_t ch = 0; ch < f; ++ch) {
    const double a = channel_weights[ch];
    const double* plane = activation.data() + ch * h * w;
    for (std::size_t i = 0; i < h * w; ++i) combined[i] += a * plane[i];
  }
  for (std::size_t i = 0; i < combined.numel(); ++i) combined[i] = std::max(0.0, combined[i]);
  Tensor raw = resize_bilinear(combined, out_h, out_w);
  return finish(std::move(raw), method, cls);
}

}  // namespace

Heatmap grad_cam(const GradientModel& model, const Tensor& image, int target_class, const std::string& layer) {
  check_class(model, target_class);
  const auto tap = model.layer_score_grad(image, target_class, layer);
  const std::size_t f = tap.activation.dim(0), hw = tap.activation.dim(1) * tap.activation.dim(2);
  std::vector<double> alpha(f, 0.0);
  for (std::size_t ch = 0; ch < f; ++ch) {
    const double* g = tap.grad.data() + ch * hw;
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += g[i];
    alpha[ch] = acc / static_cast<double>(hw);
  }
  const auto [h, w] = spatial_dims(image);
  return cam_from_weights(tap.activation, alpha, h, w, "grad-cam", target_class);
}

Heatmap grad_cam_pp(const GradientModel& model, const Tensor& image, int target_class, const std::string& layer) {
  check_class(model, target_class);
  const auto tap = model.layer_score_grad(image, target_class, layer);
  const std::size_t f = tap.activation.dim(0), hw = tap.activation.dim(1) * tap.activation.dim(2);
  std::vector<double> alpha(f, 0.0);
  for (std::size_t ch = 0; ch < f; ++ch) {
    const double* g = tap.grad.data() + ch * hw;
    const double* a = tap.activation.data() + ch * hw;
    double act_sum = 0.0;
    for (std::size_t i = 0; i < hw; ++i) act_sum += a[i];
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      const double g2 = g[i] * g[i];
      const double denom = 2.0 * g2 + act_sum * g2 * g[i];
      if (denom == 0.0) continue;
      const double weight = g2 / denom;
      acc += weight * std::max(0.0, g[i]);
    }
    alpha[ch] = acc;
  }
  const auto [h, w] = spatial_dims(image);
  return cam_from_weights(tap.activation, alpha, h, w, "grad-cam++", target_class);
}

std::vector<std::size_t> rank_channels_by_variance(const Tensor& activation) {
  const std::size_t f = activation.dim(0), hw = activation.dim(1) * activation.dim(2);
  std::vector<double> variance(f);
  for (std::size_t ch = 0; ch < f; ++ch) {
    const double* a = activation.data() + ch * hw;
    double mean = 0.0;
    for (std::size_t i = 0; i < hw; ++i) mean += a[i];
    mean /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (a[i] - mean) * (a[i] - mean);
    variance[ch] = var / static_cast<double>(hw);
  }
  std::vector<std::size_t> order(f);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return variance[a] > variance[b]; });
  return order;
}

namespace {

constexpr std::size_t kPredictChunk = 8;

// Score-CAM core over a channel subset. Channels are processed in ascending
// index order so the full-subset case is bit-identical to plain Score-CAM.
Heatmap score_cam_impl(const ForwardModel& model, const Tensor& image, int cls, const Tensor& activation,
                       std::vector<std::size_t> channels, const char* method) {
  if (image.rank() != 3) throw DimensionError("score_cam expects one [C,H,W] image");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::sort(channels.begin(), channels.end());

  std::vector<Tensor> upsampled;
  upsampled.reserve(channels.size());
  const std::size_t fh = activation.dim(1), fw = activation.dim(2);
  for (std::size_t ch : channels) {
    Tensor plane({fh, fw});
    std::copy(activation.data() + ch * fh * fw, activation.data() + (ch + 1) * fh * fw, plane.data());
    upsampled.push_back(resize_bilinear(plane, h, w));
  }

  // Masked copies of the input plus the zero baseline, evaluated in chunks.
  const std::size_t k = channels.size();
  std::vector<double> scores(k + 1, 0.0);
  std::vector<Tensor> inputs;
  inputs.reserve(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    const Tensor mask = normalize_unit(upsampled[i]);
    Tensor masked = image;
    for (std::size_t c = 0; c < image.dim(0); ++c) {
      double* plane = masked.data() + c * h * w;
      for (std::size_t p = 0; p < h * w; ++p) plane[p] *= mask[p];
    }
    inputs.push_back(std::move(masked));
  }
  inputs.push_back(Tensor(image.shape()));  // zero baseline

  for (std::size_t begin = 0; begin < inputs.size(); begin += kPredictChunk) {
    const std::size_t end = std::min(inputs.size(), begin + kPredictChunk);
    Tensor batch({end - begin, image.dim(0), h, w});
    for (std::size_t i = begin; i < end; ++i) {
      std::copy(inputs[i].data(), inputs[i].data() + inputs[i].numel(), batch.data() + (i - begin) * image.numel());
    }
    const Tensor probs = model.predict(batch);
    for (std::size_t i = begin; i < end; ++i) scores[i] = probs(i - begin, static_cast<std::size_t>(cls));
  }

  const double baseline = scores[k];
  std::vector<double> cic(k);
  for (std::size_t i = 0; i < k; ++i) cic[i] = scores[i] - baseline;

  // Softmax over the CIC scores.
  const double mx = *std::max_element(cic.begin(), cic.end());
  double z = 0.0;
  for (double& c : cic) {
    c = std::exp(c - mx);
    z += c;
  }
  for (double& c : cic) c /= z;

  Tensor raw({h, w});
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t p = 0; p < h * w; ++p) raw[p] += cic[i] * upsampled[i][p];
  }
  for (std::size_t p = 0; p < h * w; ++p) raw[p] = std::max(0.0, raw[p]);
  return finish(std::move(raw), method, cls);
}

}  // namespace

Heatmap score_cam(const ForwardModel& model, const Tensor& image, int target_class, const std::string& layer) {
  if (target_class < 0 || target_class >= model.num_classes()) throw ContractError("class index out of range");
  Tensor activation = model.layer_activation(image, layer);
  std::vector<std::size_t> all(activation.dim(0));
  std::iota(all.begin(), all.end(), 0);
  return score_cam_impl(model, image, target_class, activation, std::move(all), "score-cam");
}

Heatmap faster_score_cam(const ForwardModel& model, const Tensor& image, int target_class, const std::string& layer,
                         int top_k) {
  if (target_class < 0 || target_class >= model.num_classes()) throw ContractError("class index out of range");
  Tensor activation = model.layer_activation(image, layer);
  const std::size_t f = activation.dim(0);
  if (top_k < 1 || static_cast<std::size_t>(top_k) > f) {
    throw ContractError("faster_score_cam top_k must be in [1, channel count]");
  }
  std::vector<std::size_t> ranked = rank_channels_by_variance(activation);
  ranked.resize(static_cast<std::size_t>(top_k));
  return score_cam_impl(model, image, target_class, activation, std::move(ranked), "faster-score-cam");
}

void write_heatmap_sidecar(const std::string& path, const Heatmap& heatmap, const std::string& layer,
                           const CamConfig& config) {
  const json doc{{"method", heatmap.method},
                 {"target_class", heatmap.target_class},
                 {"layer", layer},
                 {"config",
                  {{"target_layer", config.target_layer},
                   {"smoothgrad_samples", config.smoothgrad_samples},
                   {"smoothgrad_sigma_fraction", config.smoothgrad_sigma_fraction},
                   {"scorecam_top_k", config.scorecam_top_k},
                   {"classmodel_steps", config.classmodel_steps},
                   {"classmodel_lambda", config.classmodel_lambda},
                   {"classmodel_step_size", config.classmodel_step_size},
                   {"seed", config.seed}}},
                 {"min", heatmap.raw_min},
                 {"max", heatmap.raw_max}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write sidecar JSON " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace xaikit
