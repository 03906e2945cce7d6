#pragma once

#include <array>

#include "cmmlp/nn.hpp"

namespace cmmlp {

struct LossWeights {
  int pool_k = 15;
  double gain = 5.0;
};

namespace detail {
// Mean pooling over a k x k window clipped at the borders and normalized by
// the valid pixel count, so constant maps pool to themselves.
template <typename T>
inline Tensor<T> meanpool_same(const Tensor<T>& x, int k) {
  int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  int r = k / 2;
  Tensor<T> out(x.shape);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        int y0 = std::max(0, y - r), y1 = std::min(H - 1, y + r);
        int x0 = std::max(0, xx - r), x1 = std::min(W - 1, xx + r);
        double acc = 0;
        for (int yy = y0; yy <= y1; ++yy)
          for (int xc = x0; xc <= x1; ++xc) acc += static_cast<double>(x.at(c, yy, xc));
        out.at(c, y, xx) = static_cast<T>(acc / ((y1 - y0 + 1) * (x1 - x0 + 1)));
      }
  return out;
}
}  // namespace detail

// w = 1 + gain * |meanpool_k(G) - G|; largest near mask boundaries.
template <typename T>
inline Tensor<T> boundary_weights(const Tensor<T>& gt, const LossWeights& lw) {
  Tensor<T> pooled = detail::meanpool_same(gt, lw.pool_k);
  Tensor<T> w(gt.shape);
  for (int64_t i = 0; i < gt.numel(); ++i)
    w.data[i] = T(1) + static_cast<T>(lw.gain) * std::abs(pooled.data[i] - gt.data[i]);
  return w;
}

template <typename T>
inline void check_binary_mask(const Tensor<T>& gt, const char* op) {
  for (T v : gt.data)
    if (v != T(0) && v != T(1))
      throw std::invalid_argument(std::string(op) + ": ground truth must be strictly binary");
}

namespace ops {

template <typename T>
struct WeightedLossVars {
  Var<T> total;  // iou + bce, differentiable w.r.t. the logits
  Var<T> iou;
  Var<T> bce;
};

// Boundary-weighted IoU plus boundary-weighted BCE on mask logits.
template <typename T>
inline WeightedLossVars<T> weighted_bce_iou(Var<T> logits, const Tensor<T>& gt,
                                            const LossWeights& lw = {}) {
  const Tensor<T>& lv = logits.value();
  if (!(lv.shape == gt.shape))
    throw std::invalid_argument("weighted_bce_iou: shape mismatch " + shape_str(lv.shape) + " vs " +
                                shape_str(gt.shape));
  check_binary_mask(gt, "weighted_bce_iou");

  Tensor<T> w = boundary_weights(gt, lw);
  T sum_w = T(0), sum_wg = T(0);
  Tensor<T> wg(w.shape);
  for (int64_t i = 0; i < w.numel(); ++i) {
    sum_w += w.data[i];
    wg.data[i] = w.data[i] * gt.data[i];
    sum_wg += wg.data[i];
  }

  Var<T> bce = scale(sum(mul_const(bce_with_logits(logits, gt), w)), T(1) / sum_w);

  Var<T> p = sigmoid(logits);
  Var<T> inter = sum(mul_const(p, wg));                      // sum w*p*G
  Var<T> wp = sum(mul_const(p, w));                          // sum w*p
  Var<T> uni = sub(add_const(wp, sum_wg), inter);            // sum w*(p + G - p*G)
  Var<T> iou = add_const(neg(div(inter, uni)), T(1));

  return {add(iou, bce), iou, bce};
}

struct BranchLoss {
  double iou = 0;
  double bce = 0;
  double loss() const { return iou + bce; }
};

struct LossReport {
  std::array<BranchLoss, 4> branches{};
  double total = 0;
};

template <typename T>
struct TotalLossVars {
  Var<T> total;
  LossReport report;
};

// Deep supervision: each mask-logits map is upsampled to ground-truth size
// and contributes one weighted BCE+IoU term; the total is their sum.
template <typename T>
inline TotalLossVars<T> total_loss(const std::array<Var<T>, 4>& mask_logits, const Tensor<T>& gt,
                                   const LossWeights& lw = {}) {
  int H = gt.shape[1], W = gt.shape[2];
  TotalLossVars<T> out;
  Var<T> acc{};
  for (int i = 0; i < 4; ++i) {
    Var<T> m = mask_logits[i];
    const Shape& ms = m.value().shape;
    if (ms[1] != H || ms[2] != W) m = resize_bilinear(m, H, W);
    WeightedLossVars<T> l = weighted_bce_iou(m, gt, lw);
    out.report.branches[i] = {static_cast<double>(l.iou.value().data[0]),
                              static_cast<double>(l.bce.value().data[0])};
    acc = i == 0 ? l.total : add(acc, l.total);
  }
  out.total = acc;
  out.report.total = static_cast<double>(acc.value().data[0]);
  return out;
}

}  // namespace ops
}  // namespace cmmlp
