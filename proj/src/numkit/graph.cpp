// SPDX-License-Identifier: Apache-2.0
#include "cad/numkit/graph.hpp"

#include "cad/errors.hpp"

namespace cad::numkit {

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), value_(std::move(value)), grad_(value_.shape()) {}

const Tensor& Var::value() const {
  if (!graph_) throw ContractError("use of an unbound Var");
  return *graph_->nodes_[id_].value;
}

Tensor Var::grad() const {
  if (!graph_) throw ContractError("use of an unbound Var");
  const auto& node = graph_->nodes_[id_];
  if (node.grad_target) return *node.grad_target;
  if (!node.grad_touched) return Tensor::zeros(node.value->shape());
  return node.grad;
}

bool Var::requires_grad() const { return graph_ && graph_->nodes_[id_].requires_grad; }

Var Graph::constant(Tensor value) {
  auto& n = nodes_.emplace_back();
  n.op = "constant";
  n.owned = std::move(value);
  n.value = &n.owned;
  return {this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  Var v = constant(std::move(value));
  nodes_.back().op = "input";
  nodes_.back().requires_grad = true;
  return v;
}

Var Graph::param(Parameter& p) {
  auto& n = nodes_.emplace_back();
  n.op = "param";
  n.value = &p.value();
  n.grad_target = &p.grad();
  n.requires_grad = true;
  return {this, nodes_.size() - 1};
}

Var Graph::reference(const Tensor& value) {
  auto& n = nodes_.emplace_back();
  n.op = "reference";
  n.value = &value;
  return {this, nodes_.size() - 1};
}

Var Graph::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  auto& n = nodes_.emplace_back();
  n.op = op;
  n.owned = std::move(value);
  n.value = &n.owned;
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.graph() != this) throw ContractError(std::string(op) + ": input from another graph");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return {this, nodes_.size() - 1};
}

Tensor* Graph::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad_target) return n.grad_target;
  if (!n.grad_touched) {
    n.grad = Tensor::zeros(n.value->shape());
    n.grad_touched = true;
  }
  return &n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw ContractError("backward: loss from another graph");
  if (loss.value().size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  Tensor* seed = grad_slot(loss.id());
  if (!seed) return;
  (*seed)[0] += 1.0;

  std::vector<Tensor*> slots;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || !n.grad_touched) continue;
    if (!n.grad.all_finite()) throw NumericError(std::string("non-finite gradient reaching ") + n.op);
    slots.clear();
    for (std::size_t in : n.inputs) slots.push_back(grad_slot(in));
    n.backward(n.grad, slots);
  }
}

}  // namespace cad::numkit
