#pragma once

#include <string>

#include "cmmlp/init.hpp"
#include "cmmlp/rng.hpp"
#include "oracles.hpp"

namespace testsup {

template <typename T>
inline cmmlp::Tensor<T> rand_tensor(cmmlp::Rng& rng, cmmlp::Shape s, double lo = -1.0, double hi = 1.0) {
  cmmlp::Tensor<T> t(std::move(s));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
inline cmmlp::Tensor<T> rand_binary(cmmlp::Rng& rng, cmmlp::Shape s) {
  cmmlp::Tensor<T> t(std::move(s));
  for (auto& v : t.data) v = rng.coin() ? T(1) : T(0);
  return t;
}

template <typename T>
inline double max_abs_diff(const cmmlp::Tensor<T>& a, const cmmlp::Tensor<T>& b) {
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
  return m;
}

inline oracle::D fetch(const cmmlp::ParamStore<double>& store, const std::string& name) {
  return store.at(name);
}

inline oracle::MfiParamsRef fetch_mfi(const cmmlp::ParamStore<double>& store,
                                      const std::string& prefix, int depth) {
  oracle::MfiParamsRef p;
  for (int k = 0; k < depth; ++k) {
    std::string up = prefix + ".up.k" + std::to_string(k);
    std::string bot = prefix + ".bottom.k" + std::to_string(k);
    p.up.push_back({fetch(store, up + ".global.w"), fetch(store, up + ".global.b"),
                    fetch(store, up + ".local.w"), fetch(store, up + ".local.b")});
    p.bottom.push_back({fetch(store, bot + ".global.w"), fetch(store, bot + ".global.b"),
                        fetch(store, bot + ".local.w"), fetch(store, bot + ".local.b")});
  }
  p.fuse_w = fetch(store, prefix + ".fuse.w");
  p.fuse_b = fetch(store, prefix + ".fuse.b");
  return p;
}

inline oracle::AttnParamsRef fetch_attn(const cmmlp::ParamStore<double>& store,
                                        const std::string& prefix) {
  return {fetch(store, prefix + ".h.wq"), fetch(store, prefix + ".h.wk"),
          fetch(store, prefix + ".h.wv"), fetch(store, prefix + ".h.wo"),
          fetch(store, prefix + ".w.wq"), fetch(store, prefix + ".w.wk"),
          fetch(store, prefix + ".w.wv"), fetch(store, prefix + ".w.wo")};
}

inline oracle::AcreParamsRef fetch_acre(const cmmlp::ParamStore<double>& store,
                                        const std::string& prefix) {
  oracle::AcreParamsRef p;
  p.attn = fetch_attn(store, prefix + ".attn");
  p.fore_w = fetch(store, prefix + ".fore.w");
  p.fore_b = fetch(store, prefix + ".fore.b");
  p.back_w = fetch(store, prefix + ".back.w");
  p.back_b = fetch(store, prefix + ".back.b");
  p.fuse_w = fetch(store, prefix + ".fuse.w");
  p.fuse_b = fetch(store, prefix + ".fuse.b");
  return p;
}

inline oracle::PartialDecodeParamsRef fetch_pd(const cmmlp::ParamStore<double>& store) {
  return {fetch(store, "pd.lat1.w"),  fetch(store, "pd.lat1.b"),  fetch(store, "pd.lat2.w"),
          fetch(store, "pd.lat2.b"),  fetch(store, "pd.lat3.w"),  fetch(store, "pd.lat3.b"),
          fetch(store, "pd.fuse.w"),  fetch(store, "pd.fuse.b"),  fetch(store, "pd.down1.w"),
          fetch(store, "pd.down1.b"), fetch(store, "pd.down2.w"), fetch(store, "pd.down2.b")};
}

}  // namespace testsup
