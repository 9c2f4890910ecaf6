#include "xaikit/autodiff.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "xaikit/kernels.hpp"

namespace xaikit {

Var Graph::push(Tensor value, const char* tag, std::function<void(Graph&, int)> back) {
  Node n;
  n.owned = std::move(value);
  n.grad = Tensor(n.owned.shape());
  n.tag = tag;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Graph::Node& Graph::node(Var v) {
  if (!v.valid() || v.index >= static_cast<int>(nodes_.size())) throw ContractError("invalid graph handle");
  return nodes_[v.index];
}

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || v.index >= static_cast<int>(nodes_.size())) throw ContractError("invalid graph handle");
  return nodes_[v.index];
}

const Tensor& Graph::value(Var v) const { return node(v).value(); }
const Tensor& Graph::grad(Var v) const { return node(v).grad; }
const std::string& Graph::op_tag(Var v) const { return node(v).tag; }

Var Graph::leaf(Tensor value, const char* tag) { return push(std::move(value), tag, nullptr); }

Var Graph::leaf_ref(const Tensor& external, const char* tag) {
  Node n;
  n.external = &external;
  n.grad = Tensor(external.shape());
  n.tag = tag;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::conv2d(Var input, Var kernels, Var bias, std::size_t stride) {
  Tensor out = kernels::conv2d_forward(value(input), value(kernels), value(bias), stride);
  return push(std::move(out), "conv2d", [input, kernels, bias, stride](Graph& g, int self) {
    kernels::conv2d_backward(g.value(input), g.value(kernels), stride, g.nodes_[self].grad, &g.grad_mut(input),
                             &g.grad_mut(kernels), &g.grad_mut(bias));
  });
}

Var Graph::maxpool2(Var input) {
  auto argmax = std::make_shared<std::vector<std::uint32_t>>();
  Tensor out = kernels::maxpool2_forward(value(input), argmax.get());
  return push(std::move(out), "maxpool2", [input, argmax](Graph& g, int self) {
    kernels::maxpool2_backward(g.value(input).shape(), *argmax, g.nodes_[self].grad, &g.grad_mut(input));
  });
}

Var Graph::dense(Var input, Var weights, Var bias) {
  Tensor out = kernels::dense_forward(value(input), value(weights), value(bias));
  return push(std::move(out), "dense", [input, weights, bias](Graph& g, int self) {
    kernels::dense_backward(g.value(input), g.value(weights), g.nodes_[self].grad, &g.grad_mut(input),
                            &g.grad_mut(weights), &g.grad_mut(bias));
  });
}

Var Graph::relu(Var input) {
  Tensor out = kernels::relu_forward(value(input));
  return push(std::move(out), "relu", [input](Graph& g, int self) {
    kernels::relu_backward(g.value(input), g.nodes_[self].grad, &g.grad_mut(input));
  });
}

Var Graph::softmax(Var input) {
  Tensor out = kernels::softmax_rows(value(input));
  return push(std::move(out), "softmax", [input](Graph& g, int self) {
    kernels::softmax_backward(g.nodes_[self].value(), g.nodes_[self].grad, &g.grad_mut(input));
  });
}

Var Graph::dropout(Var input, double rate, bool training, std::uint64_t seed) {
  if (!training || rate == 0.0) {
    // Inference mode is the identity.
    Tensor out = value(input);
    return push(std::move(out), "dropout", [input](Graph& g, int self) {
      Tensor& gi = g.grad_mut(input);
      const Tensor& go = g.nodes_[self].grad;
      for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i];
    });
  }
  auto mask = std::make_shared<Tensor>(kernels::dropout_mask(value(input).shape(), rate, seed));
  const Tensor& in = value(input);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = in[i] * (*mask)[i];
  return push(std::move(out), "dropout", [input, mask](Graph& g, int self) {
    Tensor& gi = g.grad_mut(input);
    const Tensor& go = g.nodes_[self].grad;
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i] * (*mask)[i];
  });
}

Var Graph::flatten2(Var input) {
  const Tensor& in = value(input);
  if (in.rank() < 2) throw DimensionError("flatten2 expects rank >= 2");
  const std::size_t n = in.dim(0);
  Tensor out = in.reshaped({n, in.numel() / n});
  return push(std::move(out), "flatten2", [input](Graph& g, int self) {
    Tensor& gi = g.grad_mut(input);
    const Tensor& go = g.nodes_[self].grad;
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i];
  });
}

Var Graph::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  const Tensor &ta = value(a), &tb = value(b);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ta[i] + tb[i];
  return push(std::move(out), "add", [a, b](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    Tensor& ga = g.grad_mut(a);
    Tensor& gb = g.grad_mut(b);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      ga[i] += go[i];
      gb[i] += go[i];
    }
  });
}

Var Graph::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  const Tensor &ta = value(a), &tb = value(b);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ta[i] - tb[i];
  return push(std::move(out), "sub", [a, b](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    Tensor& ga = g.grad_mut(a);
    Tensor& gb = g.grad_mut(b);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      ga[i] += go[i];
      gb[i] -= go[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  const Tensor &ta = value(a), &tb = value(b);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ta[i] * tb[i];
  return push(std::move(out), "mul", [a, b](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor &va = g.value(a), &vb = g.value(b);
    Tensor& ga = g.grad_mut(a);
    Tensor& gb = g.grad_mut(b);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      ga[i] += go[i] * vb[i];
      gb[i] += go[i] * va[i];
    }
  });
}

Var Graph::mul_const(Var a, Tensor weights) {
  require_same_shape(value(a), weights, "mul_const");
  const Tensor& ta = value(a);
  auto w = std::make_shared<Tensor>(std::move(weights));
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ta[i] * (*w)[i];
  return push(std::move(out), "mul_const", [a, w](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    Tensor& ga = g.grad_mut(a);
    for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * (*w)[i];
  });
}

Var Graph::scale(Var a, double factor) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ta[i] * factor;
  return push(std::move(out), "scale", [a, factor](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    Tensor& ga = g.grad_mut(a);
    for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * factor;
  });
}

Var Graph::add_scalar(Var a, double constant) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ta[i] + constant;
  return push(std::move(out), "add_scalar", [a](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    Tensor& ga = g.grad_mut(a);
    for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
  });
}

Var Graph::log(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(ta[i]);
  return push(std::move(out), "log", [a](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& va = g.value(a);
    Tensor& ga = g.grad_mut(a);
    for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += go[i] / va[i];
  });
}

Var Graph::clamp(Var a, double lo, double hi) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, ta[i]));
  return push(std::move(out), "clamp", [a, lo, hi](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& va = g.value(a);
    Tensor& ga = g.grad_mut(a);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      if (va[i] >= lo && va[i] <= hi) ga[i] += go[i];
    }
  });
}

Var Graph::column(Var matrix, std::size_t col) {
  const Tensor& m = value(matrix);
  if (m.rank() != 2) throw DimensionError("column expects [N,K]");
  const std::size_t n = m.dim(0), k = m.dim(1);
  if (col >= k) throw DimensionError("column index out of range");
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = m[i * k + col];
  return push(std::move(out), "column", [matrix, col, k](Graph& g, int self) {
    const Tensor& go = g.nodes_[self].grad;
    Tensor& gm = g.grad_mut(matrix);
    for (std::size_t i = 0; i < go.numel(); ++i) gm[i * k + col] += go[i];
  });
}

Var Graph::element(Var matrix, std::size_t row, std::size_t col) {
  const Tensor& m = value(matrix);
  if (m.rank() != 2) throw DimensionError("element expects [N,K]");
  if (row >= m.dim(0) || col >= m.dim(1)) throw DimensionError("element index out of range");
  const std::size_t off = row * m.dim(1) + col;
  Tensor out({1});
  out[0] = m[off];
  return push(std::move(out), "element", [matrix, off](Graph& g, int self) {
    g.grad_mut(matrix)[off] += g.nodes_[self].grad[0];
  });
}

Var Graph::sum(Var a) {
  Tensor out({1});
  out[0] = value(a).sum();
  return push(std::move(out), "sum", [a](Graph& g, int self) {
    const double go = g.nodes_[self].grad[0];
    Tensor& ga = g.grad_mut(a);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += go;
  });
}

Var Graph::mean(Var a) {
  const std::size_t n = value(a).numel();
  Tensor out({1});
  out[0] = value(a).sum() / static_cast<double>(n);
  return push(std::move(out), "mean", [a, n](Graph& g, int self) {
    const double go = g.nodes_[self].grad[0] / static_cast<double>(n);
    Tensor& ga = g.grad_mut(a);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += go;
  });
}

void Graph::backward(Var loss) {
  Node& l = node(loss);
  if (l.value().numel() != 1) {
    throw ContractError("backward requires a scalar loss node, got " + std::to_string(l.value().numel()) +
                        " elements");
  }
  l.grad[0] = 1.0;
  for (int i = loss.index; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this, i);
  }
}

}  // namespace xaikit
