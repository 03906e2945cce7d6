#pragma once

#include <vector>

#include "cmmlp/dataset.hpp"
#include "cmmlp/loss.hpp"
#include "cmmlp/metrics.hpp"
#include "cmmlp/network.hpp"
#include "cmmlp/optim.hpp"
#include "cmmlp/threading.hpp"

namespace cmmlp {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 4;
  OptimConfig optim;
  uint64_t seed = 1;
  bool deterministic = false;
  bool augment = false;
  int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = none
  AugmentConfig aug;
  LossWeights loss;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint cadence must be >= 0");
    optim.validate();
  }
};

struct HistoryEntry {
  int epoch = 0;
  double train_loss = 0;
  double train_iou = 0;
  double train_bce = 0;
  MetricReport val;
};

template <typename T>
struct FitResult {
  std::vector<HistoryEntry> history;
  ParamStore<T> best;
  double best_val_dice = -1;
  int best_epoch = -1;
};

template <typename T>
class Trainer {
 public:
  Trainer(ModelConfig model, TrainConfig cfg) : model_(model), cfg_(cfg), opt_(cfg.optim) {
    cfg_.validate();
  }

  const ModelConfig& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

  // Per-sample forward/backward (parallel across the batch, joined in sample
  // order), mean gradient, one optimizer step.
  ops::LossReport train_step(ParamStore<T>& params, const std::vector<Sample>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    check_uniform(batch);
    ensure_params(params, batch.front());
    int n = static_cast<int>(batch.size());
    std::vector<std::map<std::string, Tensor<T>>> grads(n);
    std::vector<ops::LossReport> reports(n);
    std::vector<std::string> nan_diag(n);

    parallel_for(
        n,
        [&](int64_t i) {
          Tape<T> tape;
          Workspace<T> ws(tape, params);
          auto out = ops::forward_full(ws, batch[i].image.template cast<T>(), model_);
          auto tl = ops::total_loss(out.mask_logits, batch[i].mask.template cast<T>(), cfg_.loss);
          if (!std::isfinite(tl.report.total)) {
            nan_diag[i] = tape.first_nonfinite();
            if (nan_diag[i].empty()) nan_diag[i] = "loss";
            return;
          }
          tape.backward(ops::scale(tl.total, T(1) / static_cast<T>(n)));
          grads[i] = ws.gradients();
          reports[i] = tl.report;
        },
        threads());

    for (int i = 0; i < n; ++i)
      if (!nan_diag[i].empty())
        throw std::runtime_error("train_step: non-finite loss for sample '" + batch[i].id +
                                 "'; first non-finite tensor: " + nan_diag[i]);

    std::map<std::string, Tensor<T>> acc = std::move(grads[0]);
    for (int i = 1; i < n; ++i)
      for (auto& [name, g] : grads[i]) {
        Tensor<T>& a = acc.at(name);
        for (int64_t j = 0; j < g.numel(); ++j) a.data[j] += g.data[j];
      }
    opt_.step(params, acc);

    ops::LossReport mean;
    for (int i = 0; i < n; ++i) {
      mean.total += reports[i].total / n;
      for (int b = 0; b < 4; ++b) {
        mean.branches[b].iou += reports[i].branches[b].iou / n;
        mean.branches[b].bce += reports[i].branches[b].bce / n;
      }
    }
    return mean;
  }

  MetricReport evaluate(ParamStore<T>& params, const std::vector<Sample>& data) {
    if (data.empty()) return {};
    check_uniform(data);
    ensure_params(params, data.front());
    int n = static_cast<int>(data.size());
    std::vector<MetricReport> reps(n);
    parallel_for(
        n,
        [&](int64_t i) {
          Tape<T> tape;
          Workspace<T> ws(tape, params, false);
          auto out = ops::forward_full(ws, data[i].image.template cast<T>(), model_);
          reps[i] = metrics_single(out.mask_final.value(), data[i].mask.template cast<T>());
        },
        threads());
    return metrics_aggregate(reps);
  }

  using EpochCallback = std::function<void(int epoch, const HistoryEntry&, const ParamStore<T>&)>;

  FitResult<T> fit(ParamStore<T>& params, std::vector<Sample> train, const std::vector<Sample>& val,
                   const EpochCallback& on_epoch = nullptr) {
    if (train.empty()) throw std::invalid_argument("fit: empty training set");
    ensure_params(params, train.front());
    FitResult<T> res;
    const std::vector<Sample>& val_set = val.empty() ? train : val;
    for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      Rng rng(hash_name(cfg_.seed, "epoch" + std::to_string(epoch)));
      for (size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.bounded(i)]);

      double lsum = 0, isum = 0, bsum = 0;
      int steps = 0;
      for (size_t at = 0; at < train.size(); at += cfg_.batch_size) {
        size_t end = std::min(train.size(), at + cfg_.batch_size);
        std::vector<Sample> batch(train.begin() + at, train.begin() + end);
        if (cfg_.augment) {
          uint64_t aug_seed = hash_name(cfg_.seed, "aug_epoch" + std::to_string(epoch));
          for (Sample& s : batch) s = augment(s, aug_seed, cfg_.aug);
        }
        ops::LossReport r = train_step(params, batch);
        lsum += r.total;
        for (int b = 0; b < 4; ++b) {
          isum += r.branches[b].iou;
          bsum += r.branches[b].bce;
        }
        ++steps;
      }

      HistoryEntry h;
      h.epoch = epoch;
      h.train_loss = lsum / steps;
      h.train_iou = isum / steps;
      h.train_bce = bsum / steps;
      h.val = evaluate(params, val_set);
      res.history.push_back(h);
      if (h.val.dice > res.best_val_dice) {
        res.best_val_dice = h.val.dice;
        res.best = params;
        res.best_epoch = epoch;
      }
      if (on_epoch) on_epoch(epoch, h, params);
    }
    return res;
  }

  Optimizer<T>& optimizer() { return opt_; }

 private:
  int threads() const { return (cfg_.deterministic || deterministic_env()) ? 1 : -1; }

  void ensure_params(ParamStore<T>& params, const Sample& probe) {
    if (params.size() == 0)
      materialize_params(params, model_, probe.image.shape[1], probe.image.shape[2]);
  }

  // parameters are materialized once; mixed sizes would mutate the store
  // from inside the parallel region
  static void check_uniform(const std::vector<Sample>& data) {
    for (const Sample& s : data)
      if (!(s.image.shape == data.front().image.shape))
        throw std::invalid_argument("samples must share one size, got " +
                                    shape_str(data.front().image.shape) + " and " +
                                    shape_str(s.image.shape) + " ('" + s.id + "')");
  }

  ModelConfig model_;
  TrainConfig cfg_;
  Optimizer<T> opt_;
};

}  // namespace cmmlp
