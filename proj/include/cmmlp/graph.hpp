#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cmmlp/tape.hpp"

namespace cmmlp {

struct LeafSpec {
  std::string name;
  Shape shape;
  bool requires_grad = true;
};

// A recordable computation: declared leaves plus a builder that wires ops on
// a fresh tape each forward() call. Re-running with identical bindings is
// bitwise deterministic because every op evaluates in recording order.
template <typename T>
class Graph {
 public:
  using LeafVars = std::map<std::string, Var<T>>;
  using Builder = std::function<Var<T>(Tape<T>&, const LeafVars&)>;
  using Bindings = std::map<std::string, Tensor<T>>;

  Graph(std::vector<LeafSpec> leaves, Builder builder)
      : leaves_(std::move(leaves)), builder_(std::move(builder)) {}

  const std::vector<LeafSpec>& leaves() const { return leaves_; }

  const Tensor<T>& forward(const Bindings& bindings) {
    for (const auto& [name, t] : bindings) {
      bool known = false;
      for (const LeafSpec& l : leaves_)
        if (l.name == name) known = true;
      if (!known) throw std::invalid_argument("forward: binding for unknown leaf '" + name + "'");
    }
    tape_ = std::make_unique<Tape<T>>();
    leaf_vars_.clear();
    for (const LeafSpec& l : leaves_) {
      auto it = bindings.find(l.name);
      if (it == bindings.end())
        throw std::invalid_argument("forward: missing binding for leaf '" + l.name + "'");
      if (!(it->second.shape == l.shape))
        throw std::invalid_argument("forward: shape mismatch for leaf '" + l.name + "': declared " +
                                    shape_str(l.shape) + ", bound " + shape_str(it->second.shape));
      leaf_vars_[l.name] = tape_->leaf(it->second, l.requires_grad, l.name);
    }
    out_ = builder_(*tape_, leaf_vars_);
    return tape_->value(out_);
  }

  // d(output)/d(leaf) for every gradient-requiring leaf; zero tensors for
  // leaves the output does not depend on.
  std::map<std::string, Tensor<T>> backward() {
    if (!tape_) throw std::logic_error("backward: no forward pass recorded");
    tape_->backward(out_);
    std::map<std::string, Tensor<T>> grads;
    for (const LeafSpec& l : leaves_)
      if (l.requires_grad) grads[l.name] = tape_->grad(leaf_vars_.at(l.name));
    return grads;
  }

  const Tensor<T>& output() const {
    if (!tape_) throw std::logic_error("output: no forward pass recorded");
    return tape_->value(out_);
  }

  Tape<T>* tape() { return tape_.get(); }

 private:
  std::vector<LeafSpec> leaves_;
  Builder builder_;
  std::unique_ptr<Tape<T>> tape_;
  LeafVars leaf_vars_;
  Var<T> out_{};
};

}  // namespace cmmlp
