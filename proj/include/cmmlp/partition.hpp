#pragma once

#include <string>

#include "cmmlp/ops.hpp"

namespace cmmlp {

// g x g patches of extent (H/g, W/g); divisibility is a hard error, never
// implicit padding.
struct GridLayout {
  int g, patch_h, patch_w;
  GridLayout(int g_, int H, int W) : g(g_) {
    if (g < 1 || H % g != 0 || W % g != 0)
      throw std::invalid_argument("grid: g=" + std::to_string(g_) + " does not divide H=" +
                                  std::to_string(H) + ", W=" + std::to_string(W));
    patch_h = H / g;
    patch_w = W / g;
  }
};

// patches of extent b x b; (H/b, W/b) of them.
struct BlockLayout {
  int b, count_h, count_w;
  BlockLayout(int b_, int H, int W) : b(b_) {
    if (b < 1 || H % b != 0 || W % b != 0)
      throw std::invalid_argument("block: b=" + std::to_string(b_) + " does not divide H=" +
                                  std::to_string(H) + ", W=" + std::to_string(W));
    count_h = H / b;
    count_w = W / b;
  }
};

namespace ops {

// (C,H,W) -> (g*g, Hg*Wg, C); axis 0 indexes patches row-major, axis 1 the
// positions within a patch row-major.
template <typename T>
inline Var<T> grid(Var<T> x, int g) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 3) throw std::invalid_argument("grid: (C,H,W) required");
  int C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
  GridLayout lay(g, H, W);
  int P = g * g, Q = lay.patch_h * lay.patch_w;
  std::vector<int64_t> map(static_cast<size_t>(P) * Q * C);
  int64_t idx = 0;
  for (int pi = 0; pi < g; ++pi)
    for (int pj = 0; pj < g; ++pj)
      for (int qi = 0; qi < lay.patch_h; ++qi)
        for (int qj = 0; qj < lay.patch_w; ++qj) {
          int y = pi * lay.patch_h + qi, xx = pj * lay.patch_w + qj;
          for (int c = 0; c < C; ++c)
            map[idx++] = (static_cast<int64_t>(c) * H + y) * W + xx;
        }
  return gather(x, {P, Q, C}, std::move(map), "grid");
}

template <typename T>
inline Var<T> ungrid(Var<T> t, int g, int H, int W) {
  const Tensor<T>& tv = t.value();
  if (tv.rank() != 3) throw std::invalid_argument("ungrid: rank-3 tensor required");
  GridLayout lay(g, H, W);
  int C = tv.shape[2], Q = lay.patch_h * lay.patch_w;
  if (tv.shape[0] != g * g || tv.shape[1] != Q)
    throw std::invalid_argument("ungrid: tensor " + shape_str(tv.shape) + " does not match g=" +
                                std::to_string(g) + " H=" + std::to_string(H) + " W=" + std::to_string(W));
  std::vector<int64_t> map(static_cast<size_t>(C) * H * W);
  int64_t idx = 0;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        int pi = y / lay.patch_h, qi = y % lay.patch_h;
        int pj = xx / lay.patch_w, qj = xx % lay.patch_w;
        int p = pi * g + pj, q = qi * lay.patch_w + qj;
        map[idx++] = (static_cast<int64_t>(p) * Q + q) * C + c;
      }
  return gather(t, {C, H, W}, std::move(map), "ungrid");
}

// (C,H,W) -> (Hb*Wb, b*b, C)
template <typename T>
inline Var<T> block(Var<T> x, int b) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 3) throw std::invalid_argument("block: (C,H,W) required");
  int C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
  BlockLayout lay(b, H, W);
  int P = lay.count_h * lay.count_w, Q = b * b;
  std::vector<int64_t> map(static_cast<size_t>(P) * Q * C);
  int64_t idx = 0;
  for (int pi = 0; pi < lay.count_h; ++pi)
    for (int pj = 0; pj < lay.count_w; ++pj)
      for (int qi = 0; qi < b; ++qi)
        for (int qj = 0; qj < b; ++qj) {
          int y = pi * b + qi, xx = pj * b + qj;
          for (int c = 0; c < C; ++c)
            map[idx++] = (static_cast<int64_t>(c) * H + y) * W + xx;
        }
  return gather(x, {P, Q, C}, std::move(map), "block");
}

template <typename T>
inline Var<T> unblock(Var<T> t, int b, int H, int W) {
  const Tensor<T>& tv = t.value();
  if (tv.rank() != 3) throw std::invalid_argument("unblock: rank-3 tensor required");
  BlockLayout lay(b, H, W);
  int C = tv.shape[2], Q = b * b;
  if (tv.shape[0] != lay.count_h * lay.count_w || tv.shape[1] != Q)
    throw std::invalid_argument("unblock: tensor " + shape_str(tv.shape) + " does not match b=" +
                                std::to_string(b) + " H=" + std::to_string(H) + " W=" + std::to_string(W));
  std::vector<int64_t> map(static_cast<size_t>(C) * H * W);
  int64_t idx = 0;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        int pi = y / b, qi = y % b;
        int pj = xx / b, qj = xx % b;
        int p = pi * lay.count_w + pj, q = qi * b + qj;
        map[idx++] = (static_cast<int64_t>(p) * Q + q) * C + c;
      }
  return gather(t, {C, H, W}, std::move(map), "unblock");
}

}  // namespace ops
}  // namespace cmmlp
