#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cmmlp/tensor.hpp"

namespace cmmlp {

template <typename T>
class Tape;

// Lightweight handle into a tape; cheap to copy.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape; }
};

// Define-by-run reverse-mode tape. Recording order is the evaluation order;
// backward replays it in reverse. Single-owner: one thread records and
// differentiates a given tape.
template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first accumulation
    std::vector<int> parents;
    std::function<void(Tape&, int)> backprop;  // (tape, self id)
    bool requires_grad = false;
    const char* op = "";
    std::string label;  // leaf name, for diagnostics
  };

  Var<T> leaf(Tensor<T> value, bool requires_grad, std::string label = {}) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.op = "leaf";
    n.label = std::move(label);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<T> record(Tensor<T> value, std::vector<int> parents,
                std::function<void(Tape&, int)> backprop, const char* op) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    for (int p : n.parents)
      if (nodes_[p].requires_grad) n.requires_grad = true;
    if (n.requires_grad) n.backprop = std::move(backprop);
    n.op = op;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id].value; }

  // Zero tensor if the node never received gradient flow.
  Tensor<T> grad(Var<T> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.numel() == 0) return Tensor<T>::zeros(n.value.shape);
    return n.grad;
  }

  Tensor<T>& grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.numel() == 0) n.grad = Tensor<T>::zeros(n.value.shape);
    return n.grad;
  }

  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  void backward(Var<T> out) {
    if (out.tape != this) throw std::invalid_argument("backward: output var belongs to another tape");
    if (value(out).numel() != 1)
      throw std::invalid_argument("backward: output must be scalar, got shape " +
                                  shape_str(value(out).shape));
    grad_buffer(out.id).data[0] = T(1);
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backprop) continue;
      if (n.grad.numel() == 0) continue;  // no gradient reached this node
      n.backprop(*this, i);
    }
  }

  size_t size() const { return nodes_.size(); }

  // Name of the first recorded node whose value contains a non-finite
  // element, or empty string. Drives NaN abort diagnostics.
  std::string first_nonfinite() const {
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (!all_finite(nodes_[i].value)) {
        std::string where = nodes_[i].op;
        if (!nodes_[i].label.empty()) where += "(" + nodes_[i].label + ")";
        return where + " at node " + std::to_string(i);
      }
    }
    return {};
  }

 private:
  std::vector<Node> nodes_;
};

template <typename T>
inline const Tensor<T>& Var<T>::value() const {
  return tape->value(id);
}

namespace detail {

// Accumulate `delta` into the grad buffer of `id` if that node wants grads.
template <typename T>
inline void accum_grad(Tape<T>& tape, int id, const Tensor<T>& delta) {
  if (!tape.requires_grad(id)) return;
  Tensor<T>& g = tape.grad_buffer(id);
  for (int64_t i = 0; i < delta.numel(); ++i) g.data[i] += delta.data[i];
}

template <typename T>
inline void check_same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

}  // namespace detail

}  // namespace cmmlp
