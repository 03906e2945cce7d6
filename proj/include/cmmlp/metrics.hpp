#pragma once

#include <cstdint>
#include <vector>

#include "cmmlp/tensor.hpp"

namespace cmmlp {

struct MetricReport {
  double dice = 0;
  double miou = 0;
  double mae = 0;
  double mpa = 0;
  int64_t count = 0;  // images aggregated
};

struct OverlapCounts {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

template <typename T>
inline OverlapCounts overlap_counts(const Tensor<T>& pred_prob, const Tensor<T>& gt,
                                    double threshold = 0.5) {
  OverlapCounts c;
  for (int64_t i = 0; i < gt.numel(); ++i) {
    bool p = static_cast<double>(pred_prob.data[i]) > threshold;
    bool g = gt.data[i] != T(0);
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

// Single-image metrics. Empty-vs-empty overlap scores 1.0 so blank images do
// not poison the means; MAE is computed on raw probabilities.
template <typename T>
inline MetricReport metrics_single(const Tensor<T>& pred_prob, const Tensor<T>& gt,
                                   double threshold = 0.5) {
  if (!(pred_prob.shape == gt.shape))
    throw std::invalid_argument("metrics: shape mismatch " + shape_str(pred_prob.shape) + " vs " +
                                shape_str(gt.shape));
  OverlapCounts c = overlap_counts(pred_prob, gt, threshold);
  MetricReport r;
  r.count = 1;
  int64_t denom_dice = 2 * c.tp + c.fp + c.fn;
  r.dice = denom_dice == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom_dice);
  int64_t denom_iou = c.tp + c.fp + c.fn;
  r.miou = denom_iou == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(denom_iou);

  double abs_acc = 0;
  for (int64_t i = 0; i < gt.numel(); ++i)
    abs_acc += std::abs(static_cast<double>(pred_prob.data[i]) - static_cast<double>(gt.data[i]));
  r.mae = abs_acc / static_cast<double>(gt.numel());

  // mean of per-class accuracies, skipping classes absent from ground truth
  double acc_sum = 0;
  int classes = 0;
  if (c.tp + c.fn > 0) {
    acc_sum += static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    ++classes;
  }
  if (c.tn + c.fp > 0) {
    acc_sum += static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    ++classes;
  }
  r.mpa = classes == 0 ? 1.0 : acc_sum / classes;
  return r;
}

// Mean over per-image reports, compensated summation in input order.
inline MetricReport metrics_aggregate(const std::vector<MetricReport>& reports) {
  MetricReport out;
  if (reports.empty()) return out;
  double sums[4] = {0, 0, 0, 0};
  double comp[4] = {0, 0, 0, 0};
  for (const MetricReport& r : reports) {
    double vals[4] = {r.dice, r.miou, r.mae, r.mpa};
    for (int i = 0; i < 4; ++i) {
      double y = vals[i] - comp[i];
      double t = sums[i] + y;
      comp[i] = (t - sums[i]) - y;
      sums[i] = t;
    }
    out.count += r.count;
  }
  double n = static_cast<double>(reports.size());
  out.dice = sums[0] / n;
  out.miou = sums[1] / n;
  out.mae = sums[2] / n;
  out.mpa = sums[3] / n;
  return out;
}

}  // namespace cmmlp
