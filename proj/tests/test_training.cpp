#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

#include "cmmlp/checkpoint.hpp"
#include "cmmlp/train.hpp"
#include "support/helpers.hpp"

using namespace cmmlp;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.enc_widths = {2, 2, 4, 4, 8};
  cfg.decoder_width = 4;
  return cfg;
}

std::vector<Sample> tiny_dataset(int count, int size = 64) {
  SynthSpec spec;
  spec.count = count;
  spec.size = size;
  return generate(spec);
}

bool stores_equal(const ParamStore<float>& a, const ParamStore<float>& b) {
  if (a.size() != b.size()) return false;
  auto it = b.begin();
  for (const auto& [name, t] : a) {
    if (it->first != name || !(it->second.shape == t.shape)) return false;
    if (std::memcmp(t.data.data(), it->second.data.data(), t.data.size() * sizeof(float)) != 0)
      return false;
    ++it;
  }
  return true;
}

}  // namespace

TEST_CASE("lookahead with alpha=1 tracks the inner optimizer exactly") {
  for (auto kind : {OptimConfig::Kind::Adam, OptimConfig::Kind::Momentum}) {
    OptimConfig inner;
    inner.kind = kind;
    inner.lookahead_k = 1;
    inner.lookahead_alpha = 1.0;  // sync every step, full step: inner dynamics
    OptimConfig wrapped = inner;
    wrapped.lookahead_k = 4;
    wrapped.lookahead_alpha = 1.0;

    ParamStore<float> pa(7), pb(7);
    pa.get_or_create("w", {16}, InitKind::FanInNormal, 4);
    pb.get_or_create("w", {16}, InitKind::FanInNormal, 4);
    Optimizer<float> oa(inner), ob(wrapped);
    Rng rng(3);
    for (int step = 0; step < 13; ++step) {
      std::map<std::string, Tensor<float>> ga{{"w", testsup::rand_tensor<float>(rng, {16})}};
      std::map<std::string, Tensor<float>> gb = ga;
      oa.step(pa, ga);
      ob.step(pb, gb);
      REQUIRE(stores_equal(pa, pb));
    }
  }
}

TEST_CASE("lookahead with alpha<1 pulls parameters toward the slow weights") {
  OptimConfig plain;
  plain.kind = OptimConfig::Kind::Momentum;
  plain.lookahead_k = 1000;  // effectively disabled within the horizon
  OptimConfig la = plain;
  la.lookahead_k = 5;
  la.lookahead_alpha = 0.5;
  ParamStore<float> pa(7), pb(7);
  pa.get_or_create("w", {8}, InitKind::FanInNormal, 4);
  pb.get_or_create("w", {8}, InitKind::FanInNormal, 4);
  Optimizer<float> oa(plain), ob(la);
  Rng rng(4);
  for (int step = 0; step < 5; ++step) {
    std::map<std::string, Tensor<float>> ga{{"w", testsup::rand_tensor<float>(rng, {8})}};
    std::map<std::string, Tensor<float>> gb = ga;
    oa.step(pa, ga);
    ob.step(pb, gb);
  }
  REQUIRE_FALSE(stores_equal(pa, pb));
}

TEST_CASE("zero learning rate leaves parameters unchanged with finite loss") {
  ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.optim.lr = 0.0;
  cfg.batch_size = 2;
  Trainer<float> trainer(model, cfg);
  ParamStore<float> params(1);
  auto data = tiny_dataset(2);
  materialize_params(params, model, 64, 64);
  ParamStore<float> before = params;
  auto report = trainer.train_step(params, data);
  REQUIRE(std::isfinite(report.total));
  REQUIRE(stores_equal(params, before));
}

TEST_CASE("negative learning rates are rejected") {
  OptimConfig bad;
  bad.lr = -1e-3;
  REQUIRE_THROWS(bad.validate());
}

TEST_CASE("momentum descent reaches the quadratic minimum within 1e-4") {
  // f(x) = sum (x - c)^2 has its minimum at c
  Rng rng(5);
  Tensor<float> target = testsup::rand_tensor<float>(rng, {12}, -2.0, 2.0);
  ParamStore<float> params(6);
  params.get_or_create("x", {12}, InitKind::FanInNormal, 1);
  OptimConfig cfg;
  cfg.kind = OptimConfig::Kind::Momentum;
  cfg.lr = 0.05;
  cfg.momentum = 0.9;
  cfg.clip_norm = 0;
  Optimizer<float> opt(cfg);
  for (int step = 0; step < 200; ++step) {
    Tensor<float> g({12});
    const Tensor<float>& x = params.at("x");
    for (int i = 0; i < 12; ++i) g.data[i] = 2.f * (x.data[i] - target.data[i]);
    std::map<std::string, Tensor<float>> grads{{"x", g}};
    opt.step(params, grads);
  }
  for (int i = 0; i < 12; ++i)
    REQUIRE(std::abs(params.at("x").data[i] - target.data[i]) < 1e-4);
}

TEST_CASE("gradient clipping bounds the applied global norm") {
  ParamStore<float> params(8);
  params.set("w", Tensor<float>::zeros({4}));
  OptimConfig cfg;
  cfg.kind = OptimConfig::Kind::Momentum;
  cfg.lr = 1.0;
  cfg.momentum = 0.0;
  cfg.clip_norm = 1.0;
  cfg.lookahead_k = 1000;
  Optimizer<float> opt(cfg);
  std::map<std::string, Tensor<float>> grads{{"w", Tensor<float>::full({4}, 100.f)}};
  opt.step(params, grads);
  double norm = 0;
  for (float v : params.at("w").data) norm += double(v) * v;
  REQUIRE_THAT(std::sqrt(norm), Catch::Matchers::WithinAbs(1.0, 1e-5));
}

TEST_CASE("checkpoint round trip restores bitwise-identical parameters and outputs") {
  namespace fs = std::filesystem;
  ModelConfig model = tiny_model();
  ParamStore<float> params(11);
  materialize_params(params, model, 64, 64);
  fs::path path = fs::temp_directory_path() / "cmmlp_ckpt_test.ckpt";
  save_checkpoint(params, path.string());
  ParamStore<float> loaded = load_checkpoint<float>(path.string());
  REQUIRE(stores_equal(params, loaded));

  Rng rng(12);
  Tensor<float> img({3, 64, 64});
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  Tape<float> t1, t2;
  Workspace<float> w1(t1, params, false), w2(t2, loaded, false);
  Tensor<float> a = ops::forward_full(w1, img, model).mask_final.value();
  Tensor<float> b = ops::forward_full(w2, img, model).mask_final.value();
  REQUIRE(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
  fs::remove(path);
}

TEST_CASE("checkpoint dtype tags are enforced") {
  namespace fs = std::filesystem;
  ParamStore<double> params(13);
  params.set("w", Tensor<double>({2, 2}, {1, 2, 3, 4}));
  fs::path path = fs::temp_directory_path() / "cmmlp_ckpt_dtype.ckpt";
  save_checkpoint(params, path.string());
  REQUIRE(checkpoint_dtype(path.string()) == 1);
  REQUIRE_THROWS_WITH(load_checkpoint<float>(path.string()),
                      Catch::Matchers::ContainsSubstring("dtype"));
  ParamStore<double> back = load_checkpoint<double>(path.string());
  REQUIRE(back.at("w").data == std::vector<double>{1, 2, 3, 4});
  fs::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "cmmlp_ckpt_bad.ckpt";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
  }
  REQUIRE_THROWS_WITH(load_checkpoint<float>(path.string()),
                      Catch::Matchers::ContainsSubstring("magic"));
  fs::remove(path);
}

TEST_CASE("non-finite losses abort with a tensor diagnostic") {
  ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.batch_size = 1;
  Trainer<float> trainer(model, cfg);
  ParamStore<float> params(14);
  materialize_params(params, model, 64, 64);
  Tensor<float> poisoned = params.at("enc.s1.conv1.w");
  poisoned.data[0] = std::numeric_limits<float>::infinity();
  params.set("enc.s1.conv1.w", poisoned);
  auto data = tiny_dataset(1);
  REQUIRE_THROWS_WITH(trainer.train_step(params, data),
                      Catch::Matchers::ContainsSubstring("non-finite") &&
                          Catch::Matchers::ContainsSubstring("enc.s1.conv1.w"));
}

TEST_CASE("empty batches and empty training sets are rejected") {
  Trainer<float> trainer(tiny_model(), {});
  ParamStore<float> params(15);
  std::vector<Sample> none;
  REQUIRE_THROWS(trainer.train_step(params, none));
  REQUIRE_THROWS(trainer.fit(params, none, none));
}

TEST_CASE("a batch of n copies matches the single-sample step") {
  ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.batch_size = 2;
  auto data = tiny_dataset(1);
  std::vector<Sample> twice = {data[0], data[0]};

  ParamStore<float> p1(16), p2(16);
  Trainer<float> t1(model, cfg), t2(model, cfg);
  t1.train_step(p1, data);
  t2.train_step(p2, twice);
  REQUIRE(stores_equal(p1, p2));
}

TEST_CASE("one epoch over one sample yields one history entry") {
  ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  Trainer<float> trainer(model, cfg);
  ParamStore<float> params(17);
  auto data = tiny_dataset(1);
  FitResult<float> res = trainer.fit(params, data, {});
  REQUIRE(res.history.size() == 1);
  REQUIRE(res.history[0].epoch == 1);
  REQUIRE(res.best_epoch == 1);
  REQUIRE(res.best.size() == params.size());
}

TEST_CASE("deterministic fit reproduces histories and parameters bitwise") {
  ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.seed = 21;
  cfg.deterministic = true;
  cfg.augment = true;  // augmentation draws must also be reproducible
  auto data = tiny_dataset(4);

  ParamStore<float> p1(22), p2(22);
  Trainer<float> t1(model, cfg), t2(model, cfg);
  FitResult<float> r1 = t1.fit(p1, data, data);
  FitResult<float> r2 = t2.fit(p2, data, data);
  REQUIRE(stores_equal(p1, p2));
  REQUIRE(r1.history.size() == r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i) {
    REQUIRE(r1.history[i].train_loss == r2.history[i].train_loss);
    REQUIRE(r1.history[i].val.dice == r2.history[i].val.dice);
    REQUIRE(r1.history[i].val.mae == r2.history[i].val.mae);
  }
}

TEST_CASE("loss decreases over a short overfit run") {
  ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.optim.lr = 3e-3;
  Trainer<float> trainer(model, cfg);
  ParamStore<float> params(23);
  auto data = tiny_dataset(2);
  double first = trainer.train_step(params, data).total;
  double last = first;
  for (int step = 0; step < 30; ++step) last = trainer.train_step(params, data).total;
  REQUIRE(std::isfinite(last));
  REQUIRE(last < first);
}
