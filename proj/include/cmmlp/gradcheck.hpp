#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "cmmlp/graph.hpp"
#include "cmmlp/rng.hpp"

namespace cmmlp {

struct GradcheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::string worst_leaf;
  int64_t worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  int64_t elements_checked = 0;
};

namespace detail {
// Relative-error denominator floor. Central differences in float carry a
// cancellation noise floor around eps*|f|/h, so the float floor is coarse;
// the double floor keeps near-zero analytic entries meaningfully checked.
template <typename T>
constexpr double gradcheck_floor() {
  return std::is_same_v<T, float> ? 1e-1 : 1e-3;
}

// eps^(1/3) is the usual central-difference optimum; in float that step is
// small enough that subtractive cancellation dominates, so it is widened.
template <typename T>
constexpr double gradcheck_step() {
  return std::is_same_v<T, float> ? 1e-2 : 6.055454452393343e-06;  // cbrt(2^-52)
}
}  // namespace detail

// Central finite differences against the tape gradient, one leaf.
// h = eps^(1/3) * max(1, |x|) per element. max_elems < 0 checks every
// element; otherwise a deterministic subsample of that many per leaf.
template <typename T>
inline GradcheckReport gradcheck_leaf(Graph<T>& graph, const typename Graph<T>::Bindings& bindings,
                                      const std::string& leaf, double tolerance,
                                      int64_t max_elems = -1, uint64_t subsample_seed = 7) {
  const double h_base = detail::gradcheck_step<T>();
  const double floor = detail::gradcheck_floor<T>();

  graph.forward(bindings);
  if (graph.output().numel() != 1)
    throw std::invalid_argument("gradcheck: graph output must be scalar");
  auto grads = graph.backward();
  auto git = grads.find(leaf);
  if (git == grads.end()) throw std::invalid_argument("gradcheck: no gradient for leaf '" + leaf + "'");
  const Tensor<T> analytic = git->second;

  const Tensor<T>& base = bindings.at(leaf);
  int64_t n = base.numel();
  std::vector<int64_t> idxs;
  if (max_elems < 0 || max_elems >= n) {
    idxs.resize(n);
    for (int64_t i = 0; i < n; ++i) idxs[i] = i;
  } else {
    Rng rng(subsample_seed ^ hash_name(0, leaf));
    std::vector<int64_t> all(n);
    for (int64_t i = 0; i < n; ++i) all[i] = i;
    for (int64_t i = 0; i < max_elems; ++i) {
      int64_t j = i + static_cast<int64_t>(rng.bounded(n - i));
      std::swap(all[i], all[j]);
    }
    idxs.assign(all.begin(), all.begin() + max_elems);
  }

  GradcheckReport rep;
  typename Graph<T>::Bindings work = bindings;
  Tensor<T>& probe = work.at(leaf);
  for (int64_t i : idxs) {
    T saved = probe.data[i];
    T h = static_cast<T>(h_base * std::max(1.0, std::abs(static_cast<double>(saved))));
    probe.data[i] = saved + h;
    double fp = static_cast<double>(graph.forward(work).data[0]);
    probe.data[i] = saved - h;
    double fm = static_cast<double>(graph.forward(work).data[0]);
    probe.data[i] = saved;
    double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
    double a = static_cast<double>(analytic.data[i]);
    double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_leaf = leaf;
      rep.worst_index = i;
      rep.analytic_at_worst = a;
      rep.numeric_at_worst = numeric;
    }
    ++rep.elements_checked;
  }
  rep.pass = rep.max_rel_err < tolerance;
  return rep;
}

// All gradient-requiring leaves; one analytic backward, then finite
// differences per sampled element. Reports the worst element found.
template <typename T>
inline GradcheckReport gradcheck(Graph<T>& graph, const typename Graph<T>::Bindings& bindings,
                                 double tolerance, int64_t max_elems_per_leaf = -1,
                                 uint64_t subsample_seed = 7) {
  const double h_base = detail::gradcheck_step<T>();
  const double floor = detail::gradcheck_floor<T>();

  graph.forward(bindings);
  if (graph.output().numel() != 1)
    throw std::invalid_argument("gradcheck: graph output must be scalar");
  auto grads = graph.backward();

  GradcheckReport rep;
  typename Graph<T>::Bindings work = bindings;
  for (const LeafSpec& l : graph.leaves()) {
    if (!l.requires_grad) continue;
    const Tensor<T>& analytic = grads.at(l.name);
    Tensor<T>& probe = work.at(l.name);
    int64_t n = probe.numel();
    std::vector<int64_t> idxs;
    if (max_elems_per_leaf < 0 || max_elems_per_leaf >= n) {
      idxs.resize(n);
      for (int64_t i = 0; i < n; ++i) idxs[i] = i;
    } else {
      Rng rng(subsample_seed ^ hash_name(0, l.name));
      std::vector<int64_t> all(n);
      for (int64_t i = 0; i < n; ++i) all[i] = i;
      for (int64_t i = 0; i < max_elems_per_leaf; ++i) {
        int64_t j = i + static_cast<int64_t>(rng.bounded(n - i));
        std::swap(all[i], all[j]);
      }
      idxs.assign(all.begin(), all.begin() + max_elems_per_leaf);
    }
    for (int64_t i : idxs) {
      T saved = probe.data[i];
      T h = static_cast<T>(h_base * std::max(1.0, std::abs(static_cast<double>(saved))));
      probe.data[i] = saved + h;
      double fp = static_cast<double>(graph.forward(work).data[0]);
      probe.data[i] = saved - h;
      double fm = static_cast<double>(graph.forward(work).data[0]);
      probe.data[i] = saved;
      double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
      double a = static_cast<double>(analytic.data[i]);
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_leaf = l.name;
        rep.worst_index = i;
        rep.analytic_at_worst = a;
        rep.numeric_at_worst = numeric;
      }
      ++rep.elements_checked;
    }
  }
  rep.pass = rep.max_rel_err < tolerance;
  return rep;
}

}  // namespace cmmlp
