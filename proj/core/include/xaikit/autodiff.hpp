#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xaikit/tensor.hpp"

namespace xaikit {

class Graph;

// Lightweight handle to a node on a Graph tape.
struct Var {
  int index = -1;
  bool valid() const { return index >= 0; }
};

// Reverse-mode tape. Nodes are appended in forward order, so reverse index
// order is a valid reverse-topological order and a single sweep computes all
// gradients. A Graph is confined to one thread for its build and reverse pass.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. `leaf_ref` borrows external storage (model parameters) instead of
  // copying it; the caller keeps the tensor alive for the graph's lifetime.
  Var leaf(Tensor value, const char* tag = "leaf");
  Var leaf_ref(const Tensor& external, const char* tag = "leaf");

  // Network primitives.
  Var conv2d(Var input, Var kernels, Var bias, std::size_t stride = 1);
  Var maxpool2(Var input);
  Var dense(Var input, Var weights, Var bias);
  Var relu(Var input);
  Var softmax(Var input);
  Var dropout(Var input, double rate, bool training, std::uint64_t seed);

  // Shape and arithmetic glue used by the losses and explanation methods.
  Var flatten2(Var input);                       // [N,...] -> [N, rest]
  Var add(Var a, Var b);                         // elementwise, same shape
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var mul_const(Var a, Tensor weights);          // elementwise by a constant
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double constant);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);
  Var column(Var matrix, std::size_t col);       // [N,K] -> [N]
  Var element(Var matrix, std::size_t row, std::size_t col);  // [N,K] -> scalar
  Var sum(Var a);                                // -> scalar
  Var mean(Var a);                               // -> scalar

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  const std::string& op_tag(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse pass from a scalar node. Gradients of every node w.r.t. the loss
  // are populated; grad(loss) = 1. Throws ContractError on non-scalar input.
  void backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    std::string tag;
    std::function<void(Graph&, int)> back;  // accumulates into parent grads

    const Tensor& value() const { return external ? *external : owned; }
  };

  Var push(Tensor value, const char* tag, std::function<void(Graph&, int)> back);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_mut(Var v) { return node(v).grad; }

  std::vector<Node> nodes_;
};

}  // namespace xaikit
