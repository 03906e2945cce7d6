#pragma once

#include <cmath>
#include <string>

#include "cmmlp/init.hpp"
#include "cmmlp/nn.hpp"

namespace cmmlp {
namespace ops {

namespace detail {

// Scaled dot-product self-attention along the middle axis of a (B,L,C)
// token layout, with residual and output projection.
template <typename T>
inline Var<T> attn_pass(Workspace<T>& ws, Var<T> tokens, const std::string& prefix) {
  int C = tokens.value().shape[2];
  Var<T> wq = ws.param(prefix + ".wq", {C, C}, InitKind::FanInNormal, C);
  Var<T> wk = ws.param(prefix + ".wk", {C, C}, InitKind::FanInNormal, C);
  Var<T> wv = ws.param(prefix + ".wv", {C, C}, InitKind::FanInNormal, C);
  Var<T> wo = ws.param(prefix + ".wo", {C, C}, InitKind::FanInNormal, C);
  Var<T> q = mix_last(tokens, wq);
  Var<T> k = mix_last(tokens, wk);
  Var<T> v = mix_last(tokens, wv);
  Var<T> scores = scale(bmatmul(q, transpose12(k)), static_cast<T>(1.0 / std::sqrt(static_cast<double>(C))));
  Var<T> att = bmatmul(softmax_last(scores), v);
  return add(tokens, mix_last(att, wo));
}

}  // namespace detail

// Self-attention along H (columns independent), then along W (rows
// independent), via dimension permutation. Single head, no positions.
template <typename T>
inline Var<T> axial_attention(Workspace<T>& ws, Var<T> x, const std::string& prefix) {
  if (x.value().rank() != 3) throw std::invalid_argument("axial_attention: (C,H,W) required");
  // (C,H,W) -> (W,H,C): one batch entry per column, tokens along H
  Var<T> cols = permute3(x, 2, 1, 0);
  cols = detail::attn_pass(ws, cols, prefix + ".h");
  Var<T> y = permute3(cols, 2, 1, 0);
  // (C,H,W) -> (H,W,C): one batch entry per row, tokens along W
  Var<T> rows = permute3(y, 1, 2, 0);
  rows = detail::attn_pass(ws, rows, prefix + ".w");
  return permute3(rows, 2, 0, 1);
}

// Foreground/background context masking around a prior mask. The prior is
// resized to feature resolution on logits, squashed, and gates the attended
// features; the two gated paths fuse into refined mask logits.
template <typename T>
inline Var<T> acre_block(Workspace<T>& ws, Var<T> feat, Var<T> mask_prev_logits,
                         const std::string& prefix) {
  const Shape fs = feat.value().shape;  // copies: recording reallocates node storage
  const Shape ms = mask_prev_logits.value().shape;
  if (fs.size() != 3 || ms.size() != 3 || ms[0] != 1)
    throw std::invalid_argument("acre_block: need (C,H,W) features and (1,h,w) mask logits");
  int C = fs[0], H = fs[1], W = fs[2];

  Var<T> attended = axial_attention(ws, feat, prefix + ".attn");

  Var<T> m_logits = (ms[1] == H && ms[2] == W) ? mask_prev_logits : resize_bilinear(mask_prev_logits, H, W);
  Var<T> m = sigmoid(m_logits);
  Var<T> m_inv = add_const(neg(m), T(1));

  Var<T> wf = ws.param(prefix + ".fore.w", {C, C, 3, 3}, InitKind::FanInNormal, C * 9);
  Var<T> bf = ws.param(prefix + ".fore.b", {C}, InitKind::Zeros, C);
  Var<T> wb = ws.param(prefix + ".back.w", {C, C, 3, 3}, InitKind::FanInNormal, C * 9);
  Var<T> bb = ws.param(prefix + ".back.b", {C}, InitKind::Zeros, C);
  Var<T> fore = conv2d(mul_mask(attended, m), wf, bf, 1, 1);
  Var<T> back = conv2d(mul_mask(attended, m_inv), wb, bb, 1, 1);

  Var<T> cat = concat_channels<T>({fore, back});
  Var<T> wz = ws.param(prefix + ".fuse.w", {1, 2 * C, 3, 3}, InitKind::FanInNormal, 2 * C * 9);
  Var<T> bz = ws.param(prefix + ".fuse.b", {1}, InitKind::Zeros, 1);
  return conv2d(cat, wz, bz, 1, 1);
}

}  // namespace ops
}  // namespace cmmlp
