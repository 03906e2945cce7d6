#pragma once

#include <cmath>
#include <map>
#include <string>

#include "cmmlp/init.hpp"

namespace cmmlp {

struct OptimConfig {
  enum class Kind { Momentum, Adam };
  Kind kind = Kind::Adam;
  double lr = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables global-norm clipping
  int lookahead_k = 5;
  double lookahead_alpha = 0.5;

  void validate() const {
    if (lr < 0) throw std::invalid_argument("optim: lr must not be negative");
    if (lookahead_k < 1) throw std::invalid_argument("optim: lookahead k must be >= 1");
    if (lookahead_alpha <= 0 || lookahead_alpha > 1)
      throw std::invalid_argument("optim: lookahead alpha must be in (0,1]");
  }
};

inline OptimConfig::Kind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimConfig::Kind::Adam;
  if (s == "momentum" || s == "sgd") return OptimConfig::Kind::Momentum;
  throw std::invalid_argument("unknown optimizer '" + s + "' (adam|momentum)");
}

// Inner optimizer (momentum-SGD or Adam) wrapped in LookAhead slow weights:
// every k steps, slow += alpha * (fast - slow) and fast snaps to slow.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const OptimConfig& config() const { return cfg_; }
  int64_t steps() const { return step_count_; }

  void step(ParamStore<T>& params, std::map<std::string, Tensor<T>>& grads) {
    if (slow_.empty())
      for (const auto& [name, p] : params) slow_[name] = p;

    if (cfg_.clip_norm > 0) {
      double sq = 0;
      for (const auto& [name, g] : grads)
        for (T v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
      double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) {
        T s = static_cast<T>(cfg_.clip_norm / norm);
        for (auto& [name, g] : grads)
          for (T& v : g.data) v *= s;
      }
    }

    ++step_count_;
    for (auto& [name, g] : grads) {
      Tensor<T>& p = params.at(name);
      if (cfg_.kind == OptimConfig::Kind::Momentum) {
        Tensor<T>& vel = state_slot(mom_, name, p.shape);
        T mu = static_cast<T>(cfg_.momentum), lr = static_cast<T>(cfg_.lr);
        for (int64_t i = 0; i < p.numel(); ++i) {
          vel.data[i] = mu * vel.data[i] + g.data[i];
          p.data[i] -= lr * vel.data[i];
        }
      } else {
        Tensor<T>& m = state_slot(m_, name, p.shape);
        Tensor<T>& v = state_slot(v_, name, p.shape);
        T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        T corr1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_)));
        T corr2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_)));
        T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
        for (int64_t i = 0; i < p.numel(); ++i) {
          m.data[i] = b1 * m.data[i] + (T(1) - b1) * g.data[i];
          v.data[i] = b2 * v.data[i] + (T(1) - b2) * g.data[i] * g.data[i];
          T mhat = m.data[i] / corr1;
          T vhat = v.data[i] / corr2;
          p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
      }
    }

    if (step_count_ % cfg_.lookahead_k == 0) {
      T a = static_cast<T>(cfg_.lookahead_alpha);
      for (auto& [name, p] : params) {
        Tensor<T>& s = slow_.at(name);
        if (a == T(1)) {
          // alpha=1 degenerates to the inner optimizer exactly
          s = p;
          continue;
        }
        for (int64_t i = 0; i < p.numel(); ++i) {
          s.data[i] += a * (p.data[i] - s.data[i]);
          p.data[i] = s.data[i];
        }
      }
    }
  }

 private:
  Tensor<T>& state_slot(std::map<std::string, Tensor<T>>& m, const std::string& name, const Shape& shape) {
    auto it = m.find(name);
    if (it == m.end()) it = m.emplace(name, Tensor<T>::zeros(shape)).first;
    return it->second;
  }

  OptimConfig cfg_;
  int64_t step_count_ = 0;
  std::map<std::string, Tensor<T>> slow_, mom_, m_, v_;
};

}  // namespace cmmlp
