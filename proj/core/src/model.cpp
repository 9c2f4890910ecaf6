#include "xaikit/model.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <utility>

#include "json.hpp"
#include "xaikit/kernels.hpp"
#include "xaikit/random.hpp"

using nlohmann::json;

namespace xaikit {

void round_to_float32(Tensor& t) {
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(static_cast<float>(t[i]));
}

std::vector<StageDims> conv_stage_dims(const ModelConfig& config) {
  std::vector<StageDims> dims;
  std::size_t h = config.input_height, w = config.input_width;
  for (std::size_t stage = 0; stage < config.conv_filters.size(); ++stage) {
    if (h < config.kernel_size || w < config.kernel_size) {
      throw ContractError("conv stage " + std::to_string(stage + 1) + " input " + std::to_string(h) + "x" +
                          std::to_string(w) + " is smaller than the kernel");
    }
    h = h - config.kernel_size + 1;  // valid convolution, stride 1
    w = w - config.kernel_size + 1;
    h /= 2;  // 2x2 max pool, floor semantics
    w /= 2;
    if (h == 0 || w == 0) {
      throw ContractError("conv stage " + std::to_string(stage + 1) + " pools to an empty feature map");
    }
    dims.push_back({h, w});
  }
  return dims;
}

std::size_t flatten_width(const ModelConfig& config) {
  const auto dims = conv_stage_dims(config);
  return dims.back().h * dims.back().w * config.conv_filters.back();
}

void validate(const ModelConfig& config) {
  if (config.input_height == 0 || config.input_width == 0 || config.input_channels == 0) {
    throw ContractError("model input dimensions must be positive");
  }
  if (config.conv_filters.empty()) throw ContractError("model needs at least one conv stage");
  if (config.kernel_size == 0 || config.dense_units == 0 || config.num_classes == 0) {
    throw ContractError("model layer sizes must be positive");
  }
  if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) {
    throw ContractError("dropout rate must be in [0,1)");
  }
  conv_stage_dims(config);  // throws if any stage underflows
}

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * stddev;
  round_to_float32(t);
  return t;
}

json config_to_json(const ModelConfig& c) {
  return json{{"input_height", c.input_height},   {"input_width", c.input_width},
              {"input_channels", c.input_channels}, {"conv_filters", c.conv_filters},
              {"kernel_size", c.kernel_size},     {"dense_units", c.dense_units},
              {"dropout_rate", c.dropout_rate},   {"num_classes", c.num_classes}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_height = j.at("input_height").get<std::size_t>();
  c.input_width = j.at("input_width").get<std::size_t>();
  c.input_channels = j.at("input_channels").get<std::size_t>();
  c.conv_filters = j.at("conv_filters").get<std::vector<std::size_t>>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.dense_units = j.at("dense_units").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  return c;
}

// The parameter list is fully determined by the config; build and
// load_checkpoint both derive it from here.
std::vector<NamedTensor> parameter_layout(const ModelConfig& c) {
  std::vector<NamedTensor> params;
  std::size_t in_ch = c.input_channels;
  for (std::size_t i = 0; i < c.conv_filters.size(); ++i) {
    const std::string stage = "conv" + std::to_string(i + 1);
    params.push_back({stage + ".kernels", Tensor({c.conv_filters[i], in_ch, c.kernel_size, c.kernel_size})});
    params.push_back({stage + ".bias", Tensor({c.conv_filters[i]})});
    in_ch = c.conv_filters[i];
  }
  params.push_back({"dense1.weights", Tensor({flatten_width(c), c.dense_units})});
  params.push_back({"dense1.bias", Tensor({c.dense_units})});
  params.push_back({"dense2.weights", Tensor({c.dense_units, c.num_classes})});
  params.push_back({"dense2.bias", Tensor({c.num_classes})});
  return params;
}

}  // namespace

CnnModel CnnModel::build(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  CnnModel m;
  m.config_ = config;
  m.params_ = parameter_layout(config);
  Rng rng(derive_seed(seed, 0xC11));
  for (auto& p : m.params_) {
    if (p.name.ends_with(".bias")) continue;  // zero biases
    const Shape& s = p.tensor.shape();
    const std::size_t fan_in = s.size() == 4 ? s[1] * s[2] * s[3] : s[0];
    p.tensor = he_normal(s, fan_in, rng);
  }
  return m;
}

std::size_t CnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

namespace {

const Tensor& find_param(const std::vector<NamedTensor>& params, const std::string& name) {
  for (const auto& p : params) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("unknown parameter " + name);
}

}  // namespace

Tensor CnnModel::forward(const Tensor& batch, bool training, std::uint64_t dropout_seed) const {
  if (batch.rank() != 4 || batch.dim(1) != config_.input_channels || batch.dim(2) != config_.input_height ||
      batch.dim(3) != config_.input_width) {
    throw DimensionError("forward batch does not match the model input dimensions");
  }
  Tensor x = batch;
  for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) {
    const std::string stage = "conv" + std::to_string(i + 1);
    x = kernels::conv2d_forward(x, find_param(params_, stage + ".kernels"), find_param(params_, stage + ".bias"), 1);
    x = kernels::relu_forward(x);
    x = kernels::maxpool2_forward(x);
  }
  x = x.reshaped({batch.dim(0), x.numel() / batch.dim(0)});
  x = kernels::dense_forward(x, find_param(params_, "dense1.weights"), find_param(params_, "dense1.bias"));
  x = kernels::relu_forward(x);
  if (training && config_.dropout_rate > 0.0) {
    const Tensor mask = kernels::dropout_mask(x.shape(), config_.dropout_rate, dropout_seed);
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] *= mask[i];
  }
  x = kernels::dense_forward(x, find_param(params_, "dense2.weights"), find_param(params_, "dense2.bias"));
  return kernels::softmax_rows(x);
}

CnnModel::Trace CnnModel::forward_trace(Graph& graph, const Tensor& batch, bool training,
                                        std::uint64_t dropout_seed) const {
  if (batch.rank() != 4 || batch.dim(1) != config_.input_channels || batch.dim(2) != config_.input_height ||
      batch.dim(3) != config_.input_width) {
    throw DimensionError("forward batch does not match the model input dimensions");
  }
  Trace t;
  t.params.reserve(params_.size());
  for (const auto& p : params_) t.params.push_back(graph.leaf_ref(p.tensor, p.name.c_str()));

  t.input = graph.leaf(batch, "input");
  Var x = t.input;
  std::size_t pi = 0;
  for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) {
    x = graph.conv2d(x, t.params[pi], t.params[pi + 1], 1);
    pi += 2;
    x = graph.relu(x);
    t.conv_activations.push_back(x);
    x = graph.maxpool2(x);
  }
  x = graph.flatten2(x);
  x = graph.dense(x, t.params[pi], t.params[pi + 1]);
  pi += 2;
  x = graph.relu(x);
  x = graph.dropout(x, config_.dropout_rate, training, dropout_seed);
  t.logits = graph.dense(x, t.params[pi], t.params[pi + 1]);
  t.probs = graph.softmax(t.logits);
  return t;
}

std::vector<std::string> CnnModel::conv_layer_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) names.push_back("conv" + std::to_string(i + 1));
  return names;
}

std::string CnnModel::last_conv_layer() const { return "conv" + std::to_string(config_.conv_filters.size()); }

namespace {

std::size_t conv_layer_index(const CnnModel& model, const std::string& layer) {
  const auto names = model.conv_layer_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == layer) return i;
  }
  throw ContractError("unknown conv layer '" + layer + "'");
}

}  // namespace

Tensor CnnModel::conv_activation(const Tensor& image, const std::string& layer) const {
  const std::size_t want = conv_layer_index(*this, layer);
  if (image.rank() != 3) throw DimensionError("conv_activation expects one [C,H,W] image");
  Tensor x = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) {
    const std::string stage = "conv" + std::to_string(i + 1);
    x = kernels::conv2d_forward(x, find_param(params_, stage + ".kernels"), find_param(params_, stage + ".bias"), 1);
    x = kernels::relu_forward(x);
    if (i == want) return x.reshaped({x.dim(1), x.dim(2), x.dim(3)});
    x = kernels::maxpool2_forward(x);
  }
  throw ContractError("unknown conv layer '" + layer + "'");
}

std::pair<double, Tensor> CnnGradientView::class_score_grad(const Tensor& image, int cls) const {
  if (cls < 0 || cls >= num_classes()) throw ContractError("class index out of range");
  if (image.rank() != 3) throw DimensionError("class_score_grad expects one [C,H,W] image");
  Graph g;
  const Tensor batch = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  const CnnModel::Trace t = model_->forward_trace(g, batch, false, 0);
  const Var score = g.element(t.logits, 0, static_cast<std::size_t>(cls));
  g.backward(score);
  return {g.value(score)[0], g.grad(t.input).reshaped(image.shape())};
}

GradientModel::LayerTap CnnGradientView::layer_score_grad(const Tensor& image, int cls,
                                                          const std::string& layer) const {
  if (cls < 0 || cls >= num_classes()) throw ContractError("class index out of range");
  const std::size_t idx = conv_layer_index(*model_, layer);
  Graph g;
  const Tensor batch = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  const CnnModel::Trace t = model_->forward_trace(g, batch, false, 0);
  const Var score = g.element(t.logits, 0, static_cast<std::size_t>(cls));
  g.backward(score);
  const Var act = t.conv_activations[idx];
  const Shape& s = g.value(act).shape();  // [1,F,h,w]
  const Shape fhw{s[1], s[2], s[3]};
  return {g.value(act).reshaped(fhw), g.grad(act).reshaped(fhw)};
}

// --- checkpoint I/O ------------------------------------------------------
// Little-endian layout: "CXK1", u32 version, u32 config-JSON length, the
// config JSON, u32 tensor count, then per tensor: u32 name length, name,
// u32 rank, u64 dims[rank], float32 row-major payload.

namespace {

constexpr char kMagic[4] = {'C', 'X', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint has a truncated payload");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void write_f32(std::ofstream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  write_le<std::uint32_t>(out, bits);
}

float read_f32(std::ifstream& in) {
  const std::uint32_t bits = read_le<std::uint32_t>(in);
  float value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

}  // namespace

void CnnModel::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path + " for writing");
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  const std::string cfg = config_to_json(config_).dump();
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) write_le<std::uint64_t>(out, d);
    for (std::size_t i = 0; i < p.tensor.numel(); ++i) write_f32(out, static_cast<float>(p.tensor[i]));
  }
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "failed writing checkpoint " + path);
}

CnnModel CnnModel::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::bad_magic, "bad magic bytes in " + path);
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kVersion) {
    throw CheckpointError(CheckpointError::Kind::bad_version,
                          "unsupported checkpoint version " + std::to_string(version));
  }
  const auto cfg_len = read_le<std::uint32_t>(in);
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), cfg_len);
  if (!in) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint has a truncated payload");

  CnnModel m;
  try {
    m.config_ = config_from_json(json::parse(cfg));
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::io, std::string("malformed checkpoint config: ") + e.what());
  }
  validate(m.config_);
  m.params_ = parameter_layout(m.config_);

  const auto count = read_le<std::uint32_t>(in);
  if (count != m.params_.size()) {
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          "checkpoint holds " + std::to_string(count) + " tensors, expected " +
                              std::to_string(m.params_.size()));
  }
  for (auto& p : m.params_) {
    const auto name_len = read_le<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint has a truncated payload");
    if (name != p.name) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "checkpoint tensor '" + name + "' does not match expected '" + p.name + "'");
    }
    const auto rank = read_le<std::uint32_t>(in);
    Shape dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(read_le<std::uint64_t>(in));
    if (dims != p.tensor.shape()) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch, "checkpoint tensor '" + name + "' has wrong shape");
    }
    for (std::size_t i = 0; i < p.tensor.numel(); ++i) p.tensor[i] = static_cast<double>(read_f32(in));
  }
  return m;
}

}  // namespace xaikit
