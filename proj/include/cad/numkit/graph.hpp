// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cad/numkit/tensor.hpp"

namespace cad::numkit {

class Graph;

/// Trainable tensor that outlives any single graph. Gradients from every
/// graph that references it accumulate into grad() until zero_grad().
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  const std::string& name() const noexcept { return name_; }
  Tensor& value() noexcept { return value_; }
  const Tensor& value() const noexcept { return value_; }
  Tensor& grad() noexcept { return grad_; }
  const Tensor& grad() const noexcept { return grad_; }
  void zero_grad() { grad_.fill(0.0); }

 private:
  std::string name_;
  Tensor value_;
  Tensor grad_;
};

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Zero-filled when no gradient reached this node.
  Tensor grad() const;
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Backward rule: receives the output gradient and one slot per input.
/// A slot is null when that input does not need a gradient; otherwise the
/// rule adds its contribution into it.
using BackwardFn = std::function<void(const Tensor& out_grad, std::span<Tensor* const> in_grads)>;

/// Tape of operations for reverse-mode differentiation. Nodes are appended in
/// evaluation order, so creation order is a topological order.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient (read back with Var::grad()).
  Var input(Tensor value);
  /// Leaf bound to a Parameter; the value is referenced, not copied.
  Var param(Parameter& p);
  /// Leaf referencing a tensor that outlives the graph, without a gradient.
  Var reference(const Tensor& value);

  /// Appends an operation node. Throws NumericError naming `op` when the
  /// value contains NaN or Inf.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    const char* op = "";
    Tensor owned;
    const Tensor* value = nullptr;
    Tensor grad;
    Tensor* grad_target = nullptr;  // Parameter gradient for bound leaves
    bool requires_grad = false;
    bool grad_touched = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Tensor* grad_slot(std::size_t id);

  std::deque<Node> nodes_;
};

}  // namespace cad::numkit
