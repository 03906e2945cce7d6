#pragma once

#include <map>
#include <string>

#include "cmmlp/rng.hpp"
#include "cmmlp/tape.hpp"

namespace cmmlp {

enum class InitKind { FanInNormal, Zeros, Identity };

namespace detail {

template <typename T>
inline Tensor<T> init_tensor(const Shape& shape, InitKind kind, int fan_in, uint64_t seed) {
  Tensor<T> t(shape);
  switch (kind) {
    case InitKind::Zeros:
      break;
    case InitKind::FanInNormal: {
      Rng rng(seed);
      double stddev = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
      for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, stddev));
      break;
    }
    case InitKind::Identity: {
      if (shape.size() == 2 && shape[0] == shape[1]) {
        for (int i = 0; i < shape[0]; ++i) t.data[static_cast<size_t>(i) * shape[0] + i] = T(1);
      } else if (shape.size() == 4 && shape[0] == shape[1] && shape[2] == shape[3] && shape[2] % 2 == 1) {
        int k = shape[2], c = k / 2;
        for (int i = 0; i < shape[0]; ++i)
          t.data[((static_cast<size_t>(i) * shape[1] + i) * k + c) * k + c] = T(1);
      } else {
        throw std::invalid_argument("init: identity undefined for shape " + shape_str(shape));
      }
      break;
    }
  }
  return t;
}

}  // namespace detail

// Named parameter tensors. Each parameter draws from its own seed stream
// (hash of run seed and name) so creation order never shifts values.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed = 0) : seed_(seed) {}

  uint64_t seed() const { return seed_; }

  Tensor<T>& get_or_create(const std::string& name, const Shape& shape, InitKind kind, int fan_in) {
    auto it = params_.find(name);
    if (it != params_.end()) {
      if (!(it->second.shape == shape))
        throw std::invalid_argument("param '" + name + "' exists with shape " +
                                    shape_str(it->second.shape) + ", requested " + shape_str(shape));
      return it->second;
    }
    auto [ins, ok] =
        params_.emplace(name, detail::init_tensor<T>(shape, kind, fan_in, hash_name(seed_, name)));
    return ins->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Tensor<T>& at(const std::string& name) { return params_.at(name); }
  const Tensor<T>& at(const std::string& name) const { return params_.at(name); }
  void set(const std::string& name, Tensor<T> t) { params_[name] = std::move(t); }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& [k, v] : params_) n += v.numel();
    return n;
  }
  size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out(seed_);
    for (const auto& [k, v] : params_) out.set(k, v.template cast<U>());
    return out;
  }

 private:
  uint64_t seed_;
  std::map<std::string, Tensor<T>> params_;
};

// Per-forward binder of a ParamStore onto a tape. Binding is memoized by
// name so a parameter used twice accumulates gradient on one node.
template <typename T>
class Workspace {
 public:
  Workspace(Tape<T>& tape, ParamStore<T>& store, bool train = true)
      : tape_(&tape), store_(&store), train_(train) {}

  Var<T> param(const std::string& name, const Shape& shape, InitKind kind, int fan_in) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Tensor<T>& t = store_->get_or_create(name, shape, kind, fan_in);
    Var<T> v = tape_->leaf(t, train_, name);
    bound_.emplace(name, v);
    return v;
  }

  // Pre-bind a parameter name to an existing tape var (e.g. a graph leaf),
  // bypassing the store for that name.
  void bind_external(const std::string& name, Var<T> v) { bound_[name] = v; }

  Var<T> input(Tensor<T> t, bool requires_grad = false, std::string label = {}) {
    return tape_->leaf(std::move(t), requires_grad, std::move(label));
  }

  // Gradients of every parameter bound during this pass, by name.
  std::map<std::string, Tensor<T>> gradients() const {
    std::map<std::string, Tensor<T>> g;
    for (const auto& [name, var] : bound_) g[name] = tape_->grad(var);
    return g;
  }

  Tape<T>& tape() { return *tape_; }
  ParamStore<T>& store() { return *store_; }
  const std::map<std::string, Var<T>>& bound() const { return bound_; }

 private:
  Tape<T>* tape_;
  ParamStore<T>* store_;
  bool train_;
  std::map<std::string, Var<T>> bound_;
};

}  // namespace cmmlp
