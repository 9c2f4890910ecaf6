#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xaikit/autodiff.hpp"
#include "xaikit/tensor.hpp"
#include "xaikit/xai_model.hpp"

namespace xaikit {

// Geometry of the standard CNN: two valid 3x3 convolutions with 2x2 max
// pooling after each, one 256-unit dense layer with 25% dropout, and a
// 2-way softmax head.
struct ModelConfig {
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  std::size_t input_channels = 3;
  std::vector<std::size_t> conv_filters = {32, 64};
  std::size_t kernel_size = 3;
  std::size_t dense_units = 256;
  double dropout_rate = 0.25;
  std::size_t num_classes = 2;
};

// Spatial size after each conv/pool stage; throws if any stage underflows.
struct StageDims {
  std::size_t h, w;
};
std::vector<StageDims> conv_stage_dims(const ModelConfig& config);

// Flattened feature width entering the dense layer.
std::size_t flatten_width(const ModelConfig& config);

void validate(const ModelConfig& config);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class CnnModel {
 public:
  // He-normal fan-in initialization for weights, zero biases, all values
  // rounded onto the float32 grid so checkpoints round-trip bit-exactly.
  static CnnModel build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // Probabilities [N,K] for a batch [N,C,H,W]; training=true applies the
  // seeded dropout mask. No gradients are computed or stored.
  Tensor forward(const Tensor& batch, bool training = false, std::uint64_t dropout_seed = 0) const;

  // Handles to every tape node a training step or explanation needs.
  struct Trace {
    Var input;
    std::vector<Var> conv_activations;  // post-ReLU, one per conv stage
    Var logits;
    Var probs;
    std::vector<Var> params;  // same order as parameters()
  };
  Trace forward_trace(Graph& graph, const Tensor& batch, bool training, std::uint64_t dropout_seed) const;

  // Layer names accepted by the explanation methods ("conv1", "conv2", ...).
  std::vector<std::string> conv_layer_names() const;
  std::string last_conv_layer() const;

  // Post-ReLU activation [F,h,w] of a named conv layer for one image,
  // forward only.
  Tensor conv_activation(const Tensor& image, const std::string& layer) const;

  void save_checkpoint(const std::string& path) const;
  static CnnModel load_checkpoint(const std::string& path);

 private:
  CnnModel() = default;

  ModelConfig config_;
  std::vector<NamedTensor> params_;
};

// Adapters giving the explanation methods their narrow view of a CnnModel.
class CnnGradientView final : public GradientModel {
 public:
  explicit CnnGradientView(const CnnModel& model) : model_(&model) {}
  int num_classes() const override { return static_cast<int>(model_->config().num_classes); }
  std::pair<double, Tensor> class_score_grad(const Tensor& image, int cls) const override;
  LayerTap layer_score_grad(const Tensor& image, int cls, const std::string& layer) const override;

 private:
  const CnnModel* model_;
};

class CnnForwardView final : public ForwardModel {
 public:
  explicit CnnForwardView(const CnnModel& model) : model_(&model) {}
  int num_classes() const override { return static_cast<int>(model_->config().num_classes); }
  Tensor predict(const Tensor& batch) const override { return model_->forward(batch, false, 0); }
  Tensor layer_activation(const Tensor& image, const std::string& layer) const override {
    return model_->conv_activation(image, layer);
  }

 private:
  const CnnModel* model_;
};

// Rounds every element onto the float32 grid (the checkpoint precision).
void round_to_float32(Tensor& t);

}  // namespace xaikit
