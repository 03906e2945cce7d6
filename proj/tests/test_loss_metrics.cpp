#include <catch2/catch_amalgamated.hpp>

#include "cmmlp/gradcheck.hpp"
#include "cmmlp/loss.hpp"
#include "cmmlp/metrics.hpp"
#include "support/helpers.hpp"

using namespace cmmlp;

namespace {
struct LossVals {
  double total, iou, bce;
};
LossVals eval_loss(const Tensor<double>& logits, const Tensor<double>& gt, LossWeights lw = {}) {
  Tape<double> tape;
  auto l = ops::weighted_bce_iou(tape.leaf(logits, true, "logits"), gt, lw);
  return {l.total.value().data[0], l.iou.value().data[0], l.bce.value().data[0]};
}
}  // namespace

TEST_CASE("perfect saturated predictions drive both loss terms below 1e-6") {
  Rng rng(1);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 8, 8});
  Tensor<double> logits(gt.shape);
  for (int64_t i = 0; i < gt.numel(); ++i) logits.data[i] = gt.data[i] == 1.0 ? 20.0 : -20.0;
  LossVals l = eval_loss(logits, gt);
  REQUIRE(l.bce < 1e-6);
  REQUIRE(l.iou < 1e-6);
}

TEST_CASE("all-foreground ground truth makes the boundary weights vanish") {
  Tensor<double> gt = Tensor<double>::full({1, 9, 9}, 1.0);
  Tensor<double> w = boundary_weights(gt, {});
  for (double v : w.data) REQUIRE(v == 1.0);
}

TEST_CASE("weighted loss matches the pixelwise reference") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 8, 8});
    Tensor<double> logits = testsup::rand_tensor<double>(rng, {1, 8, 8}, -3.0, 3.0);
    LossVals l = eval_loss(logits, gt);
    auto [ref_iou, ref_bce] = oracle::weighted_bce_iou(logits, gt, 15, 5.0);
    REQUIRE_THAT(l.iou, Catch::Matchers::WithinAbs(ref_iou, 1e-9));
    REQUIRE_THAT(l.bce, Catch::Matchers::WithinAbs(ref_bce, 1e-9));
  }
}

TEST_CASE("loss rejects shape mismatch and non-binary targets") {
  Rng rng(3);
  Tensor<double> logits = testsup::rand_tensor<double>(rng, {1, 4, 4});
  Tensor<double> gt_small = testsup::rand_binary<double>(rng, {1, 2, 2});
  REQUIRE_THROWS_WITH(eval_loss(logits, gt_small),
                      Catch::Matchers::ContainsSubstring("shape mismatch"));
  Tensor<double> gt_gray = Tensor<double>::full({1, 4, 4}, 0.5);
  REQUIRE_THROWS_WITH(eval_loss(logits, gt_gray),
                      Catch::Matchers::ContainsSubstring("binary"));
}

TEST_CASE("deep-supervision total equals the sum of branch losses bitwise") {
  Rng rng(4);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 16, 16});
  Tape<double> tape;
  std::array<Var<double>, 4> maps = {
      tape.leaf(testsup::rand_tensor<double>(rng, {1, 2, 2}, -2, 2), true),
      tape.leaf(testsup::rand_tensor<double>(rng, {1, 4, 4}, -2, 2), true),
      tape.leaf(testsup::rand_tensor<double>(rng, {1, 8, 8}, -2, 2), true),
      tape.leaf(testsup::rand_tensor<double>(rng, {1, 16, 16}, -2, 2), true)};
  auto tl = ops::total_loss(maps, gt);
  double branch_sum = ((tl.report.branches[0].loss() + tl.report.branches[1].loss()) +
                       tl.report.branches[2].loss()) +
                      tl.report.branches[3].loss();
  REQUIRE(tl.report.total == branch_sum);
  for (const auto& b : tl.report.branches) {
    REQUIRE(b.iou >= 0.0);
    REQUIRE(b.bce >= 0.0);
  }
}

TEST_CASE("four identical maps quadruple the single loss") {
  Rng rng(5);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 8, 8});
  Tensor<double> logits = testsup::rand_tensor<double>(rng, {1, 8, 8}, -2, 2);
  Tape<double> tape;
  Var<double> v = tape.leaf(logits, true);
  auto tl = ops::total_loss<double>({v, v, v, v}, gt);
  auto single = ops::weighted_bce_iou(v, gt);
  double l = single.total.value().data[0];
  REQUIRE_THAT(tl.report.total, Catch::Matchers::WithinRel(4.0 * l, 1e-15));
}

TEST_CASE("total_loss upsamples each map to ground-truth size before scoring") {
  Rng rng(6);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 16, 16});
  Tape<double> tape;
  Var<double> coarse = tape.leaf(testsup::rand_tensor<double>(rng, {1, 4, 4}, -2, 2), true);
  auto tl = ops::total_loss<double>({coarse, coarse, coarse, coarse}, gt);

  Tape<double> tape2;
  Var<double> c2 = tape2.leaf(coarse.value(), true);
  auto manual = ops::weighted_bce_iou(ops::resize_bilinear(c2, 16, 16), gt);
  REQUIRE_THAT(tl.report.branches[0].loss(),
               Catch::Matchers::WithinRel(manual.total.value().data[0], 1e-15));
}

TEST_CASE("loss is permutation-equivariant with pooling weights disabled") {
  Rng rng(7);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 6, 6});
  Tensor<double> logits = testsup::rand_tensor<double>(rng, {1, 6, 6}, -2, 2);
  LossWeights lw{1, 0.0};  // no pooling influence
  LossVals a = eval_loss(logits, gt, lw);

  std::vector<int> perm(36);
  for (int i = 0; i < 36; ++i) perm[i] = i;
  for (size_t i = 36; i > 1; --i) std::swap(perm[i - 1], perm[rng.bounded(i)]);
  Tensor<double> gt_p(gt.shape), logits_p(logits.shape);
  for (int i = 0; i < 36; ++i) {
    gt_p.data[i] = gt.data[perm[i]];
    logits_p.data[i] = logits.data[perm[i]];
  }
  LossVals b = eval_loss(logits_p, gt_p, lw);
  REQUIRE_THAT(a.total, Catch::Matchers::WithinRel(b.total, 1e-12));
}

TEST_CASE("total_loss gradient passes gradcheck at 16x16") {
  Rng rng(8);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 16, 16});
  Graph<double> g({{"m", {1, 16, 16}, true}}, [gt](Tape<double>&, const Graph<double>::LeafVars& lv) {
    Var<double> m = lv.at("m");
    return ops::total_loss<double>({m, m, m, m}, gt).total;
  });
  auto rep = gradcheck(g, {{"m", testsup::rand_tensor<double>(rng, {1, 16, 16}, -2, 2)}}, 1e-5);
  INFO("max_rel_err=" << rep.max_rel_err);
  REQUIRE(rep.pass);
}

TEST_CASE("exact metrics for a perfect nonempty prediction") {
  Rng rng(9);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 8, 8});
  gt.data[0] = 1.0;  // ensure nonempty
  MetricReport r = metrics_single(gt, gt);
  REQUIRE(r.dice == 1.0);
  REQUIRE(r.miou == 1.0);
  REQUIRE(r.mpa == 1.0);
  REQUIRE(r.mae == 0.0);
}

TEST_CASE("half-covered foreground: dice 2/3, iou 1/2, identity holds") {
  // ground truth: 32 foreground pixels; prediction covers exactly half
  Tensor<double> gt({1, 8, 8});
  for (int i = 0; i < 32; ++i) gt.data[i] = 1.0;
  Tensor<double> pred({1, 8, 8});
  for (int i = 0; i < 16; ++i) pred.data[i] = 1.0;
  MetricReport r = metrics_single(pred, gt);
  REQUIRE(r.dice == 2.0 / 3.0);
  REQUIRE(r.miou == 0.5);
  // identity in exact rational form: tp/(s-tp) with s = |P|+|G|
  REQUIRE(r.miou == 16.0 / (48.0 - 16.0));
  // the floating evaluation of dice/(2-dice) agrees to the last bit or two
  REQUIRE_THAT(r.dice / (2.0 - r.dice), Catch::Matchers::WithinULP(r.miou, 2));
}

TEST_CASE("the iou-dice identity holds exactly over random mask pairs") {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 8, 8});
    Tensor<double> pred = testsup::rand_binary<double>(rng, {1, 8, 8});
    MetricReport r = metrics_single(pred, gt);
    // exact rational identity computed from the integer counts
    OverlapCounts c = overlap_counts(pred, gt);
    int64_t s = 2 * c.tp + c.fp + c.fn;
    if (s == 0) {
      REQUIRE(r.dice == 1.0);
      REQUIRE(r.miou == 1.0);
    } else {
      REQUIRE(r.dice == 2.0 * double(c.tp) / double(s));
      REQUIRE(r.miou == double(c.tp) / double(s - c.tp));
    }
  }
}

TEST_CASE("reported scores round-trip the published dice/miou relationship") {
  // dice 0.9696 implies iou 0.9410 under the per-image identity, within
  // rounding distance of the published 0.9412
  double dice = 0.9696;
  double iou = dice / (2.0 - dice);
  REQUIRE(std::abs(iou - 0.9412) < 0.0003);
  REQUIRE_THAT(iou, Catch::Matchers::WithinAbs(0.9410, 5e-5));
}

TEST_CASE("mae is zero only for exact probability agreement") {
  Rng rng(11);
  Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 4, 4});
  MetricReport same = metrics_single(gt, gt);
  REQUIRE(same.mae == 0.0);
  Tensor<double> off = gt;
  off.data[3] = std::abs(off.data[3] - 0.25);
  REQUIRE(metrics_single(off, gt).mae > 0.0);
}

TEST_CASE("empty-vs-empty masks score 1.0 and absent classes are skipped") {
  Tensor<double> empty({1, 4, 4});
  MetricReport r = metrics_single(empty, empty);
  REQUIRE(r.dice == 1.0);
  REQUIRE(r.miou == 1.0);
  REQUIRE(r.mpa == 1.0);  // only the background class exists and is perfect
}

TEST_CASE("metric values always lie in [0,1]") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> gt = testsup::rand_binary<double>(rng, {1, 6, 6});
    Tensor<double> pred = testsup::rand_tensor<double>(rng, {1, 6, 6}, 0.0, 1.0);
    MetricReport r = metrics_single(pred, gt);
    for (double v : {r.dice, r.miou, r.mae, r.mpa}) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("aggregation means the per-image reports") {
  std::vector<MetricReport> reps(3);
  reps[0] = {1.0, 1.0, 0.0, 1.0, 1};
  reps[1] = {0.5, 0.4, 0.2, 0.6, 1};
  reps[2] = {0.0, 0.0, 1.0, 0.5, 1};
  MetricReport agg = metrics_aggregate(reps);
  REQUIRE_THAT(agg.dice, Catch::Matchers::WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(agg.mae, Catch::Matchers::WithinAbs(0.4, 1e-15));
  REQUIRE(agg.count == 3);
}
