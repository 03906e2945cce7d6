#pragma once

#include <vector>

#include "cmmlp/ops.hpp"

namespace cmmlp {

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  bool has_bias = true;

  void validate() const {
    if (kernel != 1 && kernel != 3) throw std::invalid_argument("ConvSpec: kernel must be 1 or 3");
    if (stride < 1) throw std::invalid_argument("ConvSpec: stride must be >= 1");
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("ConvSpec: bad channel counts");
    if (kernel == 3 && stride == 1 && padding != 1)
      throw std::invalid_argument("ConvSpec: 3x3 stride-1 convolution requires padding 1");
  }
};

namespace ops {

// x: (Cin,H,W), w: (Cout,Cin,k,k), bias: (Cout) or invalid Var for none.
template <typename T>
inline Var<T> conv2d(Var<T> x, Var<T> w, Var<T> bias, int stride, int padding) {
  detail::check_same_tape(x, w, "conv2d");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 4)
    throw std::invalid_argument("conv2d: need (C,H,W) input and (O,C,k,k) weight");
  int Cin = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
  int Cout = wv.shape[0], k = wv.shape[2];
  if (wv.shape[1] != Cin)
    throw std::invalid_argument("conv2d: channel mismatch, input has " + std::to_string(Cin) +
                                " channels but weight expects " + std::to_string(wv.shape[1]));
  if (wv.shape[3] != k) throw std::invalid_argument("conv2d: non-square kernel");
  int Ho = (H + 2 * padding - k) / stride + 1;
  int Wo = (W + 2 * padding - k) / stride + 1;
  if (Ho < 1 || Wo < 1)
    throw std::invalid_argument("conv2d: output size < 1 for input " + shape_str(xv.shape));

  const bool with_bias = bias.valid();
  if (with_bias) {
    detail::check_same_tape(x, bias, "conv2d");
    if (bias.value().rank() != 1 || bias.value().shape[0] != Cout)
      throw std::invalid_argument("conv2d: bias shape must be (Cout)");
  }

  Tensor<T> out({Cout, Ho, Wo});
  if (with_bias) {
    const Tensor<T>& bv = bias.value();
    for (int oc = 0; oc < Cout; ++oc)
      std::fill(out.data.begin() + static_cast<size_t>(oc) * Ho * Wo,
                out.data.begin() + static_cast<size_t>(oc + 1) * Ho * Wo, bv.data[oc]);
  }
  // per (ky,kx) tap: valid output ranges keep iy,ix in bounds
  auto valid_range = [&](int kk, int extent, int out_extent, int& lo, int& hi) {
    lo = 0;
    while (lo < out_extent && lo * stride + kk - padding < 0) ++lo;
    hi = out_extent;
    while (hi > lo && (hi - 1) * stride + kk - padding >= extent) --hi;
  };
  for (int oc = 0; oc < Cout; ++oc) {
    T* oplane = out.data.data() + static_cast<size_t>(oc) * Ho * Wo;
    for (int ic = 0; ic < Cin; ++ic) {
      const T* xplane = xv.data.data() + static_cast<size_t>(ic) * H * W;
      const T* wk = wv.data.data() + (static_cast<size_t>(oc) * Cin + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        valid_range(ky, H, Ho, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          int ox_lo, ox_hi;
          valid_range(kx, W, Wo, ox_lo, ox_hi);
          T wval = wk[ky * k + kx];
          if (wval == T(0)) continue;
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const T* xrow = xplane + (oy * stride + ky - padding) * W + kx - padding;
            T* orow = oplane + oy * Wo;
            for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wval * xrow[ox * stride];
          }
        }
      }
    }
  }

  int ix = x.id, iw = w.id, ib = with_bias ? bias.id : -1;
  std::vector<int> parents = {ix, iw};
  if (with_bias) parents.push_back(ib);
  return x.tape->record(
      std::move(out), std::move(parents),
      [ix, iw, ib, Cin, Cout, H, W, Ho, Wo, k, stride, padding](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buffer(self);
        const Tensor<T>& xv2 = t.value(ix);
        const Tensor<T>& wv2 = t.value(iw);
        bool want_x = t.requires_grad(ix);
        bool want_w = t.requires_grad(iw);
        bool want_b = ib >= 0 && t.requires_grad(ib);
        Tensor<T>* gx = want_x ? &t.grad_buffer(ix) : nullptr;
        Tensor<T>* gw = want_w ? &t.grad_buffer(iw) : nullptr;
        if (want_b) {
          Tensor<T>& gb = t.grad_buffer(ib);
          for (int oc = 0; oc < Cout; ++oc) {
            const T* gp = g.data.data() + static_cast<size_t>(oc) * Ho * Wo;
            T acc = T(0);
            for (int i = 0; i < Ho * Wo; ++i) acc += gp[i];
            gb.data[oc] += acc;
          }
        }
        if (!want_x && !want_w) return;
        auto valid_range = [&](int kk, int extent, int out_extent, int& lo, int& hi) {
          lo = 0;
          while (lo < out_extent && lo * stride + kk - padding < 0) ++lo;
          hi = out_extent;
          while (hi > lo && (hi - 1) * stride + kk - padding >= extent) --hi;
        };
        for (int oc = 0; oc < Cout; ++oc) {
          const T* gplane = g.data.data() + static_cast<size_t>(oc) * Ho * Wo;
          for (int ic = 0; ic < Cin; ++ic) {
            const T* xplane = xv2.data.data() + static_cast<size_t>(ic) * H * W;
            const T* wk = wv2.data.data() + (static_cast<size_t>(oc) * Cin + ic) * k * k;
            T* gxplane = want_x ? gx->data.data() + static_cast<size_t>(ic) * H * W : nullptr;
            T* gwk = want_w ? gw->data.data() + (static_cast<size_t>(oc) * Cin + ic) * k * k : nullptr;
            for (int ky = 0; ky < k; ++ky) {
              int oy_lo, oy_hi;
              valid_range(ky, H, Ho, oy_lo, oy_hi);
              for (int kx = 0; kx < k; ++kx) {
                int ox_lo, ox_hi;
                valid_range(kx, W, Wo, ox_lo, ox_hi);
                T wval = wk[ky * k + kx];
                T wacc = T(0);
                for (int oy = oy_lo; oy < oy_hi; ++oy) {
                  const T* grow = gplane + oy * Wo;
                  int base = (oy * stride + ky - padding) * W + kx - padding;
                  const T* xrow = xplane + base;
                  T* gxrow = want_x ? gxplane + base : nullptr;
                  for (int ox = ox_lo; ox < ox_hi; ++ox) {
                    T gv = grow[ox];
                    if (want_w) wacc += gv * xrow[ox * stride];
                    if (want_x) gxrow[ox * stride] += gv * wval;
                  }
                }
                if (want_w) gwk[ky * k + kx] += wacc;
              }
            }
          }
        }
      },
      "conv2d");
}

template <typename T>
inline Var<T> conv2d(Var<T> x, Var<T> w, int stride, int padding) {
  return conv2d(x, w, Var<T>{}, stride, padding);
}

// Mix one of the first two axes of a rank-3 tensor with a square weight and a
// bias indexed by the mixed axis; the other two axes are untouched.
template <typename T>
inline Var<T> fc_axis(Var<T> x, Var<T> w, Var<T> bias, int axis) {
  detail::check_same_tape(x, w, "fc_axis");
  detail::check_same_tape(x, bias, "fc_axis");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const Tensor<T>& bv = bias.value();
  if (xv.rank() != 3) throw std::invalid_argument("fc_axis: rank-3 tensor required");
  if (axis != 0 && axis != 1) throw std::invalid_argument("fc_axis: axis must be 0 or 1");
  int n = xv.shape[axis];
  if (wv.rank() != 2 || wv.shape[0] != n || wv.shape[1] != n)
    throw std::invalid_argument("fc_axis: weight extent mismatch, axis extent " + std::to_string(n) +
                                " but weight is " + shape_str(wv.shape));
  if (bv.rank() != 1 || bv.shape[0] != n)
    throw std::invalid_argument("fc_axis: bias extent mismatch");

  int A = xv.shape[0], B = xv.shape[1], C = xv.shape[2];
  // strides for walking the mixed axis and the two kept axes
  int64_t sA = static_cast<int64_t>(B) * C;
  int64_t mix_stride = axis == 0 ? sA : C;
  int keep0 = axis == 0 ? B : A;
  int64_t keep0_stride = axis == 0 ? C : sA;

  Tensor<T> out(xv.shape);
  for (int u = 0; u < keep0; ++u)
    for (int c = 0; c < C; ++c) {
      int64_t base = u * keep0_stride + c;
      for (int i = 0; i < n; ++i) {
        const T* wr = wv.data.data() + static_cast<size_t>(i) * n;
        T acc = bv.data[i];
        for (int j = 0; j < n; ++j) acc += wr[j] * xv.data[base + j * mix_stride];
        out.data[base + i * mix_stride] = acc;
      }
    }

  int ix = x.id, iw = w.id, ib = bias.id;
  return x.tape->record(
      std::move(out), {ix, iw, ib},
      [ix, iw, ib, n, keep0, C, keep0_stride, mix_stride](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buffer(self);
        const Tensor<T>& xv2 = t.value(ix);
        const Tensor<T>& wv2 = t.value(iw);
        bool want_x = t.requires_grad(ix);
        bool want_w = t.requires_grad(iw);
        bool want_b = t.requires_grad(ib);
        Tensor<T>* gx = want_x ? &t.grad_buffer(ix) : nullptr;
        Tensor<T>* gw = want_w ? &t.grad_buffer(iw) : nullptr;
        Tensor<T>* gb = want_b ? &t.grad_buffer(ib) : nullptr;
        for (int u = 0; u < keep0; ++u)
          for (int c = 0; c < C; ++c) {
            int64_t base = u * keep0_stride + c;
            for (int i = 0; i < n; ++i) {
              T gi = g.data[base + i * mix_stride];
              if (gi == T(0)) continue;
              if (want_b) gb->data[i] += gi;
              const T* wr = wv2.data.data() + static_cast<size_t>(i) * n;
              T* gwr = want_w ? gw->data.data() + static_cast<size_t>(i) * n : nullptr;
              for (int j = 0; j < n; ++j) {
                T xj = xv2.data[base + j * mix_stride];
                if (want_w) gwr[j] += gi * xj;
                if (want_x) gx->data[base + j * mix_stride] += gi * wr[j];
              }
            }
          }
      },
      "fc_axis");
}

// Bilinear resize of a (C,H,W) map, align-corners=false convention.
template <typename T>
inline Var<T> resize_bilinear(Var<T> x, int Ho, int Wo) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 3) throw std::invalid_argument("resize_bilinear: (C,H,W) required");
  if (Ho < 1 || Wo < 1) throw std::invalid_argument("resize_bilinear: target extents must be >= 1");
  int C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];

  struct Tap {
    int i0, i1;
    T w1;  // weight of i1; i0 gets 1-w1
  };
  auto make_taps = [](int in, int out) {
    std::vector<Tap> taps(out);
    double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      double f = std::floor(src);
      int i0 = static_cast<int>(f);
      T frac = static_cast<T>(src - f);
      int a = std::clamp(i0, 0, in - 1);
      int b = std::clamp(i0 + 1, 0, in - 1);
      taps[o] = {a, b, frac};
    }
    return taps;
  };
  std::vector<Tap> ty = make_taps(H, Ho), tx = make_taps(W, Wo);

  Tensor<T> out({C, Ho, Wo});
  for (int c = 0; c < C; ++c) {
    const T* xp = xv.data.data() + static_cast<size_t>(c) * H * W;
    T* op = out.data.data() + static_cast<size_t>(c) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      const Tap& a = ty[oy];
      for (int ox = 0; ox < Wo; ++ox) {
        const Tap& b = tx[ox];
        T v00 = xp[a.i0 * W + b.i0], v01 = xp[a.i0 * W + b.i1];
        T v10 = xp[a.i1 * W + b.i0], v11 = xp[a.i1 * W + b.i1];
        T top = v00 + (v01 - v00) * b.w1;
        T bot = v10 + (v11 - v10) * b.w1;
        op[oy * Wo + ox] = top + (bot - top) * a.w1;
      }
    }
  }
  int ix = x.id;
  return x.tape->record(std::move(out), {ix},
                        [ix, C, H, W, Ho, Wo, ty = std::move(ty), tx = std::move(tx)](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          if (!t.requires_grad(ix)) return;
                          Tensor<T>& gx = t.grad_buffer(ix);
                          for (int c = 0; c < C; ++c) {
                            T* gp = gx.data.data() + static_cast<size_t>(c) * H * W;
                            const T* go = g.data.data() + static_cast<size_t>(c) * Ho * Wo;
                            for (int oy = 0; oy < Ho; ++oy) {
                              const auto& a = ty[oy];
                              for (int ox = 0; ox < Wo; ++ox) {
                                const auto& b = tx[ox];
                                T gv = go[oy * Wo + ox];
                                T wy1 = a.w1, wx1 = b.w1;
                                gp[a.i0 * W + b.i0] += gv * (T(1) - wy1) * (T(1) - wx1);
                                gp[a.i0 * W + b.i1] += gv * (T(1) - wy1) * wx1;
                                gp[a.i1 * W + b.i0] += gv * wy1 * (T(1) - wx1);
                                gp[a.i1 * W + b.i1] += gv * wy1 * wx1;
                              }
                            }
                          }
                        },
                        "resize_bilinear");
}

template <typename T>
inline Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
  int H = xs[0].value().shape[1], W = xs[0].value().shape[2];
  int Ctot = 0;
  std::vector<int> parents;
  for (const Var<T>& v : xs) {
    const Tensor<T>& tv = v.value();
    if (tv.rank() != 3) throw std::invalid_argument("concat_channels: (C,H,W) inputs required");
    if (tv.shape[1] != H || tv.shape[2] != W)
      throw std::invalid_argument("concat_channels: spatial mismatch " + shape_str(tv.shape));
    Ctot += tv.shape[0];
    parents.push_back(v.id);
  }
  Tensor<T> out({Ctot, H, W});
  size_t off = 0;
  for (const Var<T>& v : xs) {
    const Tensor<T>& tv = v.value();
    std::copy(tv.data.begin(), tv.data.end(), out.data.begin() + off);
    off += tv.data.size();
  }
  Tape<T>* tape = xs[0].tape;
  std::vector<int> ids = parents;
  return tape->record(std::move(out), std::move(parents),
                      [ids](Tape<T>& t, int self) {
                        const Tensor<T>& g = t.grad_buffer(self);
                        size_t off2 = 0;
                        for (int id : ids) {
                          size_t n = t.value(id).data.size();
                          if (t.requires_grad(id)) {
                            Tensor<T>& gi = t.grad_buffer(id);
                            for (size_t i = 0; i < n; ++i) gi.data[i] += g.data[off2 + i];
                          }
                          off2 += n;
                        }
                      },
                      "concat_channels");
}

template <typename T>
inline std::pair<Var<T>, Var<T>> split_channels(Var<T> x, int at) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 3) throw std::invalid_argument("split_channels: (C,H,W) required");
  int C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
  if (at < 1 || at >= C)
    throw std::invalid_argument("split_channels: split index " + std::to_string(at) +
                                " out of range for C=" + std::to_string(C));
  size_t plane = static_cast<size_t>(H) * W;
  Tensor<T> lo({at, H, W});
  Tensor<T> hi({C - at, H, W});
  std::copy(xv.data.begin(), xv.data.begin() + at * plane, lo.data.begin());
  std::copy(xv.data.begin() + at * plane, xv.data.end(), hi.data.begin());
  int ix = x.id;
  Var<T> a = x.tape->record(std::move(lo), {ix},
                            [ix](Tape<T>& t, int self) {
                              const Tensor<T>& g = t.grad_buffer(self);
                              if (t.requires_grad(ix)) {
                                Tensor<T>& gx = t.grad_buffer(ix);
                                for (int64_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
                              }
                            },
                            "split_lo");
  size_t off = at * plane;
  Var<T> b = x.tape->record(std::move(hi), {ix},
                            [ix, off](Tape<T>& t, int self) {
                              const Tensor<T>& g = t.grad_buffer(self);
                              if (t.requires_grad(ix)) {
                                Tensor<T>& gx = t.grad_buffer(ix);
                                for (int64_t i = 0; i < g.numel(); ++i) gx.data[off + i] += g.data[i];
                              }
                            },
                            "split_hi");
  return {a, b};
}

// x: (C,H,W) plus per-channel bias (C)
template <typename T>
inline Var<T> add_bias_channel(Var<T> x, Var<T> bias) {
  detail::check_same_tape(x, bias, "add_bias_channel");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  if (xv.rank() != 3 || bv.rank() != 1 || bv.shape[0] != xv.shape[0])
    throw std::invalid_argument("add_bias_channel: need (C,H,W) and (C)");
  int C = xv.shape[0];
  int64_t plane = static_cast<int64_t>(xv.shape[1]) * xv.shape[2];
  Tensor<T> out(xv.shape);
  for (int c = 0; c < C; ++c)
    for (int64_t i = 0; i < plane; ++i) out.data[c * plane + i] = xv.data[c * plane + i] + bv.data[c];
  int ix = x.id, ib = bias.id;
  return x.tape->record(std::move(out), {ix, ib},
                        [ix, ib, C, plane](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          detail::accum_grad(t, ix, g);
                          if (t.requires_grad(ib)) {
                            Tensor<T>& gb = t.grad_buffer(ib);
                            for (int c = 0; c < C; ++c) {
                              T acc = T(0);
                              for (int64_t i = 0; i < plane; ++i) acc += g.data[c * plane + i];
                              gb.data[c] += acc;
                            }
                          }
                        },
                        "add_bias_channel");
}

// Broadcast multiply of (C,H,W) features by a single-channel (1,H,W) map.
template <typename T>
inline Var<T> mul_mask(Var<T> x, Var<T> m) {
  detail::check_same_tape(x, m, "mul_mask");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& mv = m.value();
  if (xv.rank() != 3 || mv.rank() != 3 || mv.shape[0] != 1 || mv.shape[1] != xv.shape[1] ||
      mv.shape[2] != xv.shape[2])
    throw std::invalid_argument("mul_mask: need (C,H,W) and (1,H,W), got " + shape_str(xv.shape) +
                                " and " + shape_str(mv.shape));
  int C = xv.shape[0];
  int64_t plane = static_cast<int64_t>(xv.shape[1]) * xv.shape[2];
  Tensor<T> out(xv.shape);
  for (int c = 0; c < C; ++c)
    for (int64_t i = 0; i < plane; ++i)
      out.data[c * plane + i] = xv.data[c * plane + i] * mv.data[i];
  int ix = x.id, im = m.id;
  return x.tape->record(std::move(out), {ix, im},
                        [ix, im, C, plane](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& xv2 = t.value(ix);
                          const Tensor<T>& mv2 = t.value(im);
                          if (t.requires_grad(ix)) {
                            Tensor<T>& gx = t.grad_buffer(ix);
                            for (int c = 0; c < C; ++c)
                              for (int64_t i = 0; i < plane; ++i)
                                gx.data[c * plane + i] += g.data[c * plane + i] * mv2.data[i];
                          }
                          if (t.requires_grad(im)) {
                            Tensor<T>& gm = t.grad_buffer(im);
                            for (int c = 0; c < C; ++c)
                              for (int64_t i = 0; i < plane; ++i)
                                gm.data[i] += g.data[c * plane + i] * xv2.data[c * plane + i];
                          }
                        },
                        "mul_mask");
}

}  // namespace ops
}  // namespace cmmlp
