#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmmlp/tape.hpp"

namespace cmmlp {
namespace ops {

namespace detail {
using cmmlp::detail::accum_grad;
using cmmlp::detail::check_same_tape;

template <typename T>
inline void check_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!(a.value().shape == b.value().shape))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.value().shape) +
                                " vs " + shape_str(b.value().shape));
}
}  // namespace detail

template <typename T>
inline Var<T> add(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "add");
  detail::check_same_shape(a, b, "add");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] + bv.data[i];
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib},
                        [ia, ib](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          detail::accum_grad(t, ia, g);
                          detail::accum_grad(t, ib, g);
                        },
                        "add");
}

template <typename T>
inline Var<T> sub(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "sub");
  detail::check_same_shape(a, b, "sub");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] - bv.data[i];
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib},
                        [ia, ib](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          detail::accum_grad(t, ia, g);
                          if (t.requires_grad(ib)) {
                            Tensor<T>& gb = t.grad_buffer(ib);
                            for (int64_t i = 0; i < g.numel(); ++i) gb.data[i] -= g.data[i];
                          }
                        },
                        "sub");
}

template <typename T>
inline Var<T> mul(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "mul");
  detail::check_same_shape(a, b, "mul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] * bv.data[i];
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib},
                        [ia, ib](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& av2 = t.value(ia);
                          const Tensor<T>& bv2 = t.value(ib);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
                          }
                          if (t.requires_grad(ib)) {
                            Tensor<T>& gb = t.grad_buffer(ib);
                            for (int64_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * av2.data[i];
                          }
                        },
                        "mul");
}

template <typename T>
inline Var<T> div(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "div");
  detail::check_same_shape(a, b, "div");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] / bv.data[i];
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib},
                        [ia, ib](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& y = t.value(self);
                          const Tensor<T>& bv2 = t.value(ib);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] / bv2.data[i];
                          }
                          if (t.requires_grad(ib)) {
                            Tensor<T>& gb = t.grad_buffer(ib);
                            for (int64_t i = 0; i < g.numel(); ++i)
                              gb.data[i] -= g.data[i] * y.data[i] / bv2.data[i];
                          }
                        },
                        "div");
}

template <typename T>
inline Var<T> scale(Var<T> a, T c) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] * c;
  int ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia, c](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * c;
                          }
                        },
                        "scale");
}

template <typename T>
inline Var<T> add_const(Var<T> a, T c) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] + c;
  int ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia](Tape<T>& t, int self) {
                          detail::accum_grad(t, ia, t.grad_buffer(self));
                        },
                        "add_const");
}

// Elementwise multiply by a non-differentiated coefficient tensor.
template <typename T>
inline Var<T> mul_const(Var<T> a, const Tensor<T>& w) {
  const Tensor<T>& av = a.value();
  if (!(av.shape == w.shape))
    throw std::invalid_argument("mul_const: shape mismatch " + shape_str(av.shape) + " vs " +
                                shape_str(w.shape));
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] * w.data[i];
  int ia = a.id;
  Tensor<T> wcopy = w;
  return a.tape->record(std::move(out), {ia},
                        [ia, wcopy](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * wcopy.data[i];
                          }
                        },
                        "mul_const");
}

template <typename T>
inline Var<T> neg(Var<T> a) {
  return scale(a, T(-1));
}

template <typename T>
inline Var<T> sum(Var<T> a) {
  const Tensor<T>& av = a.value();
  T acc = T(0);
  for (int64_t i = 0; i < av.numel(); ++i) acc += av.data[i];
  int ia = a.id;
  return a.tape->record(Tensor<T>::scalar(acc), {ia},
                        [ia](Tape<T>& t, int self) {
                          T g = t.grad_buffer(self).data[0];
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < ga.numel(); ++i) ga.data[i] += g;
                          }
                        },
                        "sum");
}

template <typename T>
inline Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().numel()));
}

template <typename T>
inline Var<T> relu(Var<T> a) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] > T(0) ? av.data[i] : T(0);
  int ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& x = t.value(ia);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i)
                              if (x.data[i] > T(0)) ga.data[i] += g.data[i];
                          }
                        },
                        "relu");
}

template <typename T>
inline Var<T> sigmoid(Var<T> a) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) {
    T x = av.data[i];
    out.data[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                            : std::exp(x) / (T(1) + std::exp(x));
  }
  int ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& y = t.value(self);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i)
                              ga.data[i] += g.data[i] * y.data[i] * (T(1) - y.data[i]);
                          }
                        },
                        "sigmoid");
}

// Per-element binary cross entropy on logits against a fixed 0/1 target,
// in the overflow-safe max(x,0) - x*t + log1p(exp(-|x|)) form.
template <typename T>
inline Var<T> bce_with_logits(Var<T> logits, const Tensor<T>& target) {
  const Tensor<T>& xv = logits.value();
  if (!(xv.shape == target.shape))
    throw std::invalid_argument("bce_with_logits: shape mismatch " + shape_str(xv.shape) + " vs " +
                                shape_str(target.shape));
  Tensor<T> out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) {
    T x = xv.data[i];
    out.data[i] = std::max(x, T(0)) - x * target.data[i] + std::log1p(std::exp(-std::abs(x)));
  }
  int ia = logits.id;
  Tensor<T> tgt = target;
  return logits.tape->record(std::move(out), {ia},
                             [ia, tgt](Tape<T>& t, int self) {
                               const Tensor<T>& g = t.grad_buffer(self);
                               const Tensor<T>& x = t.value(ia);
                               if (t.requires_grad(ia)) {
                                 Tensor<T>& ga = t.grad_buffer(ia);
                                 for (int64_t i = 0; i < g.numel(); ++i) {
                                   T xv2 = x.data[i];
                                   T s = xv2 >= T(0) ? T(1) / (T(1) + std::exp(-xv2))
                                                     : std::exp(xv2) / (T(1) + std::exp(xv2));
                                   ga.data[i] += g.data[i] * (s - tgt.data[i]);
                                 }
                               }
                             },
                             "bce_with_logits");
}

// out flat index i reads input flat index map[i]; map must be a bijection
// for the lossless rearrangement ops built on top of this.
template <typename T>
inline Var<T> gather(Var<T> a, Shape out_shape, std::vector<int64_t> map, const char* op) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(std::move(out_shape));
  if (out.numel() != static_cast<int64_t>(map.size()))
    throw std::invalid_argument(std::string(op) + ": index map size mismatch");
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = av.data[map[i]];
  int ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia, map = std::move(map)](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i) ga.data[map[i]] += g.data[i];
                          }
                        },
                        op);
}

template <typename T>
inline Var<T> reshape(Var<T> a, Shape s) {
  const Tensor<T>& av = a.value();
  if (shape_numel(s) != av.numel())
    throw std::invalid_argument("reshape: numel mismatch " + shape_str(av.shape) + " -> " + shape_str(s));
  Tensor<T> out(std::move(s), av.data);
  int ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
                          }
                        },
                        "reshape");
}

template <typename T>
inline Var<T> permute3(Var<T> a, int p0, int p1, int p2) {
  const Tensor<T>& av = a.value();
  if (av.rank() != 3) throw std::invalid_argument("permute3: rank-3 tensor required");
  Shape in = av.shape;
  Shape out_shape = {in[p0], in[p1], in[p2]};
  std::vector<int64_t> map(av.numel());
  int64_t idx = 0;
  int64_t s[3] = {static_cast<int64_t>(in[1]) * in[2], in[2], 1};
  for (int i = 0; i < out_shape[0]; ++i)
    for (int j = 0; j < out_shape[1]; ++j)
      for (int k = 0; k < out_shape[2]; ++k) {
        int src[3];
        src[p0] = i;
        src[p1] = j;
        src[p2] = k;
        map[idx++] = src[0] * s[0] + src[1] * s[1] + src[2] * s[2];
      }
  return gather(a, out_shape, std::move(map), "permute3");
}

// Batched matrix multiply: (B,m,k) x (B,k,n) -> (B,m,n)
template <typename T>
inline Var<T> bmatmul(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "bmatmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.shape[0] != bv.shape[0] || av.shape[2] != bv.shape[1])
    throw std::invalid_argument("bmatmul: incompatible shapes " + shape_str(av.shape) + " x " +
                                shape_str(bv.shape));
  int B = av.shape[0], m = av.shape[1], k = av.shape[2], n = bv.shape[2];
  Tensor<T> out({B, m, n});
  for (int bb = 0; bb < B; ++bb) {
    const T* A = av.data.data() + static_cast<size_t>(bb) * m * k;
    const T* Bm = bv.data.data() + static_cast<size_t>(bb) * k * n;
    T* O = out.data.data() + static_cast<size_t>(bb) * m * n;
    for (int i = 0; i < m; ++i)
      for (int kk = 0; kk < k; ++kk) {
        T aik = A[i * k + kk];
        const T* brow = Bm + kk * n;
        T* orow = O + i * n;
        for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
  }
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib},
                        [ia, ib, B, m, k, n](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& av2 = t.value(ia);
                          const Tensor<T>& bv2 = t.value(ib);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int bb = 0; bb < B; ++bb) {
                              const T* G = g.data.data() + static_cast<size_t>(bb) * m * n;
                              const T* Bm = bv2.data.data() + static_cast<size_t>(bb) * k * n;
                              T* GA = ga.data.data() + static_cast<size_t>(bb) * m * k;
                              for (int i = 0; i < m; ++i)
                                for (int j = 0; j < n; ++j) {
                                  T gij = G[i * n + j];
                                  for (int kk = 0; kk < k; ++kk) GA[i * k + kk] += gij * Bm[kk * n + j];
                                }
                            }
                          }
                          if (t.requires_grad(ib)) {
                            Tensor<T>& gb = t.grad_buffer(ib);
                            for (int bb = 0; bb < B; ++bb) {
                              const T* G = g.data.data() + static_cast<size_t>(bb) * m * n;
                              const T* A = av2.data.data() + static_cast<size_t>(bb) * m * k;
                              T* GB = gb.data.data() + static_cast<size_t>(bb) * k * n;
                              for (int i = 0; i < m; ++i)
                                for (int kk = 0; kk < k; ++kk) {
                                  T aik = A[i * k + kk];
                                  const T* grow = G + i * n;
                                  T* gbrow = GB + kk * n;
                                  for (int j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
                                }
                            }
                          }
                        },
                        "bmatmul");
}

template <typename T>
inline Var<T> transpose12(Var<T> a) {
  return permute3(a, 0, 2, 1);
}

// Softmax over the last axis of a rank-3 tensor, max-shifted.
template <typename T>
inline Var<T> softmax_last(Var<T> a) {
  const Tensor<T>& av = a.value();
  if (av.rank() != 3) throw std::invalid_argument("softmax_last: rank-3 tensor required");
  int rows = av.shape[0] * av.shape[1];
  int n = av.shape[2];
  Tensor<T> out(av.shape);
  for (int r = 0; r < rows; ++r) {
    const T* x = av.data.data() + static_cast<size_t>(r) * n;
    T* y = out.data.data() + static_cast<size_t>(r) * n;
    T mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    T s = T(0);
    for (int i = 0; i < n; ++i) {
      y[i] = std::exp(x[i] - mx);
      s += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= s;
  }
  int ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia, rows, n](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& y = t.value(self);
                          if (t.requires_grad(ia)) {
                            Tensor<T>& ga = t.grad_buffer(ia);
                            for (int r = 0; r < rows; ++r) {
                              const T* gr = g.data.data() + static_cast<size_t>(r) * n;
                              const T* yr = y.data.data() + static_cast<size_t>(r) * n;
                              T* gar = ga.data.data() + static_cast<size_t>(r) * n;
                              T dot = T(0);
                              for (int i = 0; i < n; ++i) dot += gr[i] * yr[i];
                              for (int i = 0; i < n; ++i) gar[i] += yr[i] * (gr[i] - dot);
                            }
                          }
                        },
                        "softmax_last");
}

// out[a,b,i] = sum_j W[i,j] * x[a,b,j]; shared projection along the last axis.
template <typename T>
inline Var<T> mix_last(Var<T> x, Var<T> w) {
  detail::check_same_tape(x, w, "mix_last");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 2 || wv.shape[0] != wv.shape[1] || wv.shape[0] != xv.shape[2])
    throw std::invalid_argument("mix_last: need (A,B,C) and square (C,C), got " +
                                shape_str(xv.shape) + " and " + shape_str(wv.shape));
  int tokens = xv.shape[0] * xv.shape[1];
  int C = xv.shape[2];
  Tensor<T> out(xv.shape);
  for (int tk = 0; tk < tokens; ++tk) {
    const T* xr = xv.data.data() + static_cast<size_t>(tk) * C;
    T* yr = out.data.data() + static_cast<size_t>(tk) * C;
    for (int i = 0; i < C; ++i) {
      const T* wr = wv.data.data() + static_cast<size_t>(i) * C;
      T acc = T(0);
      for (int j = 0; j < C; ++j) acc += wr[j] * xr[j];
      yr[i] = acc;
    }
  }
  int ix = x.id, iw = w.id;
  return x.tape->record(std::move(out), {ix, iw},
                        [ix, iw, tokens, C](Tape<T>& t, int self) {
                          const Tensor<T>& g = t.grad_buffer(self);
                          const Tensor<T>& xv2 = t.value(ix);
                          const Tensor<T>& wv2 = t.value(iw);
                          if (t.requires_grad(ix)) {
                            Tensor<T>& gx = t.grad_buffer(ix);
                            for (int tk = 0; tk < tokens; ++tk) {
                              const T* gr = g.data.data() + static_cast<size_t>(tk) * C;
                              T* gxr = gx.data.data() + static_cast<size_t>(tk) * C;
                              for (int i = 0; i < C; ++i) {
                                T gi = gr[i];
                                const T* wr = wv2.data.data() + static_cast<size_t>(i) * C;
                                for (int j = 0; j < C; ++j) gxr[j] += gi * wr[j];
                              }
                            }
                          }
                          if (t.requires_grad(iw)) {
                            Tensor<T>& gw = t.grad_buffer(iw);
                            for (int tk = 0; tk < tokens; ++tk) {
                              const T* gr = g.data.data() + static_cast<size_t>(tk) * C;
                              const T* xr = xv2.data.data() + static_cast<size_t>(tk) * C;
                              for (int i = 0; i < C; ++i) {
                                T gi = gr[i];
                                T* gwr = gw.data.data() + static_cast<size_t>(i) * C;
                                for (int j = 0; j < C; ++j) gwr[j] += gi * xr[j];
                              }
                            }
                          }
                        },
                        "mix_last");
}

}  // namespace ops
}  // namespace cmmlp
