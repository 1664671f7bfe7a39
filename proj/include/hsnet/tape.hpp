// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "hsnet/tensor.hpp"
#include "hsnet/tensor_ops.hpp"

namespace hsnet {

// A learnable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
  Parameter(std::string id_, Tensor<T> value_)
      : id(std::move(id_)), value(std::move(value_)), grad(Tensor<T>::zeros(value.dims())) {}

  void zero_grad() { std::fill(grad.values().begin(), grad.values().end(), T{0}); }

  std::string id;
  Tensor<T> value;
  Tensor<T> grad;  // same dims as value
};

// Owns parameters with stable addresses; iteration follows insertion order.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string id, Tensor<T> value) {
    for (const auto& p : params_) {
      if (p.id == id) throw Error(ErrorCode::kInvalidSpec, "duplicate parameter id '" + id + "'");
    }
    return params_.emplace_back(std::move(id), std::move(value));
  }

  Parameter<T>& at(std::string_view id) {
    for (auto& p : params_) {
      if (p.id == id) return p;
    }
    throw Error(ErrorCode::kInvalidSpec, "no parameter '" + std::string(id) + "'");
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter<T>> params_;
};

struct Var {
  std::size_t index = 0;
};

// Records differentiable operations in execution order. backward() walks the
// record in exact reverse order, calling each operation's vector-Jacobian
// product. Nodes that do not depend on a parameter or variable are stored
// without a backward rule, so constants never receive gradients.
template <typename T>
class Tape {
 public:
  class Context {
   public:
    const Tensor<T>& grad_out() const { return node_.grad; }
    const Tensor<T>& output() const { return node_.value; }
    const Tensor<T>& input(std::size_t i) const { return tape_.nodes_[node_.inputs[i]].value; }
    // nullptr when input i does not need a gradient.
    Tensor<T>* input_grad(std::size_t i) {
      auto& in = tape_.nodes_[node_.inputs[i]];
      if (!in.requires_grad) return nullptr;
      if (in.grad.empty()) in.grad = Tensor<T>::zeros(in.value.dims());
      return &in.grad;
    }

   private:
    friend class Tape;
    Context(Tape& tape, typename Tape::Node& node) : tape_(tape), node_(node) {}
    Tape& tape_;
    typename Tape::Node& node_;
  };

  using BackwardFn = std::function<void(Context&)>;

  Var constant(Tensor<T> value) { return push(std::move(value), false, nullptr, {}, nullptr); }

  // Leaf that receives a gradient but is not a Parameter.
  Var variable(Tensor<T> value) { return push(std::move(value), true, nullptr, {}, nullptr); }

  Var parameter(Parameter<T>& p) {
    if (no_grad_) return constant(p.value);
    return push(p.value, true, &p, {}, nullptr);
  }

  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
  }

  Var record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn fn) {
    bool needs = false;
    std::vector<std::size_t> idx;
    idx.reserve(inputs.size());
    for (auto v : inputs) {
      idx.push_back(v.index);
      needs = needs || nodes_.at(v.index).requires_grad;
    }
    if (!needs) return push(std::move(value), false, nullptr, {}, nullptr);
    return push(std::move(value), true, nullptr, std::move(idx), std::move(fn));
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.index).value; }

  // Gradient of the last backward() target w.r.t. v; zeros if none flowed.
  Tensor<T> grad(Var v) const {
    const auto& n = nodes_.at(v.index);
    return n.grad.empty() ? Tensor<T>::zeros(n.value.dims()) : n.grad;
  }

  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }

  void backward(Var loss) {
    if (consumed_) throw Error(ErrorCode::kTapeConsumed, "backward already ran on this tape; reset() first");
    auto& root = nodes_.at(loss.index);
    if (root.value.size() != 1) {
      throw Error(ErrorCode::kNonScalarLoss, "loss has shape " + shape_string(root.value.dims()));
    }
    consumed_ = true;
    if (!root.requires_grad) return;
    root.grad = Tensor<T>::ones(root.value.dims());
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (!node.requires_grad || node.grad.empty()) continue;
      if (node.backward) {
        Context ctx(*this, node);
        node.backward(ctx);
      }
      if (node.param != nullptr) accumulate(node.param->grad, node.grad);
    }
  }

  void reset() {
    nodes_.clear();
    consumed_ = false;
  }

  // Parameters enter as constants; used for inference passes.
  void set_no_grad(bool on) { no_grad_ = on; }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var push(Tensor<T> value, bool requires_grad, Parameter<T>* param, std::vector<std::size_t> inputs,
           BackwardFn fn) {
    if (consumed_) throw Error(ErrorCode::kTapeConsumed, "cannot record on a consumed tape");
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, requires_grad, param, std::move(inputs), std::move(fn)});
    return Var{nodes_.size() - 1};
  }

  std::deque<Node> nodes_;
  bool consumed_ = false;
  bool no_grad_ = false;
};

}  // namespace hsnet
