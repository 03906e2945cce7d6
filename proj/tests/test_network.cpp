#include <catch2/catch_amalgamated.hpp>

#include "cmmlp/gradcheck.hpp"
#include "cmmlp/loss.hpp"
#include "cmmlp/network.hpp"
#include "cmmlp/threading.hpp"
#include "cmmlp/verify.hpp"
#include "support/helpers.hpp"

using namespace cmmlp;

namespace {
Tensor<float> seeded_image(uint64_t seed, int size) {
  Rng rng(seed);
  Tensor<float> img({3, size, size});
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}
}  // namespace

TEST_CASE("encoder stage arithmetic at 128x128") {
  ModelConfig cfg;
  ParamStore<float> store(1);
  Tape<float> tape;
  Workspace<float> ws(tape, store);
  auto enc = ops::encode(ws, ws.input(seeded_image(1, 128)), cfg);
  REQUIRE(enc.f3().value().shape == Shape{32, 16, 16});
  REQUIRE(enc.f2().value().shape == Shape{64, 8, 8});
  REQUIRE(enc.f1().value().shape == Shape{128, 4, 4});
}

TEST_CASE("encoder rejects bad sizes") {
  ModelConfig cfg;
  ParamStore<float> store(1);
  Tape<float> tape;
  Workspace<float> ws(tape, store);
  REQUIRE_THROWS_WITH(ops::encode(ws, ws.input(Tensor<float>::zeros({3, 96, 100})), cfg),
                      Catch::Matchers::ContainsSubstring("divisible by 32"));
  REQUIRE_THROWS(ops::encode(ws, ws.input(Tensor<float>::zeros({3, 32, 32})), cfg));
}

TEST_CASE("zero image with zero biases encodes to zero features") {
  ModelConfig cfg;
  ParamStore<float> store(2);
  Tape<float> tape;
  Workspace<float> ws(tape, store);
  auto enc = ops::encode(ws, ws.input(Tensor<float>::zeros({3, 64, 64})), cfg);
  for (const auto& st : enc.stages)
    for (float v : st.value().data) REQUIRE(v == 0.f);
}

TEST_CASE("golden forward snapshot on a fixed seed") {
  ModelConfig cfg;
  ParamStore<float> store(42);
  materialize_params(store, cfg, 128, 128);
  Tape<float> tape;
  Workspace<float> ws(tape, store, false);
  auto out = ops::forward_full(ws, seeded_image(7, 128), cfg);
  REQUIRE(tensor_hash(out.mask_logits[0].value()) == 0xcf89d227b87317eeull);
  REQUIRE(tensor_hash(out.mask_logits[3].value()) == 0xb792151ab76633a2ull);
  REQUIRE(tensor_hash(out.mask_final.value()) == 0x057795da3f40bc2cull);
}

TEST_CASE("parameter count is a pure function of the configuration") {
  ModelConfig cfg;
  ParamStore<float> store(3);
  REQUIRE(materialize_params(store, cfg, 128, 128) == 903561);
  ParamStore<float> again(99);  // seed changes values, never the count
  REQUIRE(materialize_params(again, cfg, 128, 128) == 903561);

  ModelConfig stripped = cfg;
  apply_setting(stripped, "w/o-MFI+w/o-ACRE");
  ParamStore<float> s2(3);
  int64_t n2 = materialize_params(s2, stripped, 128, 128);
  REQUIRE(n2 < 903561);
}

TEST_CASE("partial decoder zero case and output scale") {
  ModelConfig cfg;
  ParamStore<float> store(4);
  Tape<float> tape;
  Workspace<float> ws(tape, store);
  Var<float> f1 = ws.input(Tensor<float>::zeros({128, 4, 4}));
  Var<float> f2 = ws.input(Tensor<float>::zeros({64, 8, 8}));
  Var<float> f3 = ws.input(Tensor<float>::zeros({32, 16, 16}));
  Var<float> m0 = ops::partial_decode(ws, f1, f2, f3, cfg);
  REQUIRE(m0.value().shape == Shape{1, 4, 4});
  for (float v : m0.value().data) REQUIRE(v == 0.f);
}

TEST_CASE("partial decoder matches the straight-line reference") {
  ModelConfig cfg;
  cfg.decoder_width = 4;
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    ParamStore<double> store(50 + trial);
    Tensor<double> f1 = testsup::rand_tensor<double>(rng, {4, 2, 2});
    Tensor<double> f2 = testsup::rand_tensor<double>(rng, {3, 4, 4});
    Tensor<double> f3 = testsup::rand_tensor<double>(rng, {2, 8, 8});
    Tape<double> tape;
    Workspace<double> ws(tape, store);
    Var<double> m0 = ops::partial_decode(ws, ws.input(f1), ws.input(f2), ws.input(f3), cfg);
    oracle::D ref = oracle::partial_decode(f1, f2, f3, testsup::fetch_pd(store));
    REQUIRE(m0.value().shape == Shape{1, 2, 2});
    REQUIRE(testsup::max_abs_diff(m0.value(), ref) < 1e-6);
  }
}

TEST_CASE("branch_step with both toggles off still doubles the mask resolution") {
  ModelConfig cfg;
  cfg.use_mfi = false;
  cfg.use_acre = false;
  ParamStore<float> store(6);
  Rng rng(7);
  Tape<float> tape;
  Workspace<float> ws(tape, store);
  Var<float> feat = ws.input(testsup::rand_tensor<float>(rng, {8, 4, 4}));
  Var<float> m_prev = ws.input(testsup::rand_tensor<float>(rng, {1, 4, 4}));
  auto [m_ref, m_next] = ops::branch_step(ws, feat, m_prev, cfg, 1);
  REQUIRE(m_ref.value().shape == Shape{1, 4, 4});
  REQUIRE(m_next.value().shape == Shape{1, 8, 8});
  // no interaction or attention parameters were created
  for (const auto& [name, t] : store) {
    REQUIRE(name.find(".mfi.") == std::string::npos);
    REQUIRE(name.find(".acre.") == std::string::npos);
  }
}

TEST_CASE("zero inputs produce zero masks through the branch") {
  ModelConfig cfg;
  ParamStore<float> store(8);
  Tape<float> tape;
  Workspace<float> ws(tape, store);
  Var<float> feat = ws.input(Tensor<float>::zeros({8, 4, 4}));
  Var<float> m_prev = ws.input(Tensor<float>::zeros({1, 4, 4}));
  auto [m_ref, m_next] = ops::branch_step(ws, feat, m_prev, cfg, 1);
  for (float v : m_ref.value().data) REQUIRE(v == 0.f);
  for (float v : m_next.value().data) REQUIRE(v == 0.f);
}

TEST_CASE("scale chain: 128 input gives masks at 4,8,16,32 and final at 128") {
  ModelConfig cfg;
  ParamStore<float> store(9);
  Tape<float> tape;
  Workspace<float> ws(tape, store);
  auto out = ops::forward_full(ws, seeded_image(9, 128), cfg);
  REQUIRE(out.mask_logits[0].value().shape == Shape{1, 4, 4});
  REQUIRE(out.mask_logits[1].value().shape == Shape{1, 8, 8});
  REQUIRE(out.mask_logits[2].value().shape == Shape{1, 16, 16});
  REQUIRE(out.mask_logits[3].value().shape == Shape{1, 32, 32});
  REQUIRE(out.mask_final.value().shape == Shape{1, 128, 128});
  for (float v : out.mask_final.value().data) {
    REQUIRE(v > 0.f);
    REQUIRE(v < 1.f);
  }
}

TEST_CASE("every ablation setting produces shape-identical outputs") {
  const char* settings[] = {"full",     "w/o-MFI", "w/o-Local", "w/o-Global",
                            "w/o-ACRE", "MFI-PP",  "MFI-CP"};
  Tensor<float> img = seeded_image(11, 64);
  for (const char* s : settings) {
    ModelConfig cfg;
    cfg.enc_widths = {4, 4, 8, 8, 16};
    cfg.decoder_width = 4;
    apply_setting(cfg, s);
    ParamStore<float> store(12);
    Tape<float> tape;
    Workspace<float> ws(tape, store);
    auto out = ops::forward_full(ws, img, cfg);
    INFO(s);
    REQUIRE(out.mask_logits[0].value().shape == Shape{1, 2, 2});
    REQUIRE(out.mask_logits[3].value().shape == Shape{1, 16, 16});
    REQUIRE(out.mask_final.value().shape == Shape{1, 64, 64});
  }
}

TEST_CASE("unknown ablation settings are rejected") {
  ModelConfig cfg;
  REQUIRE_THROWS_WITH(apply_setting(cfg, "w/o-Everything"),
                      Catch::Matchers::ContainsSubstring("w/o-Everything"));
}

TEST_CASE("forward and backward stay finite over 100 random images") {
  ModelConfig cfg;
  ParamStore<float> store(13);
  materialize_params(store, cfg, 128, 128);
  std::vector<char> ok(100, 0);
  parallel_for(100, [&](int64_t i) {
    Rng rng(hash_name(1000, "img" + std::to_string(i)));
    Tensor<float> img({3, 128, 128});
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    Tensor<float> gt({1, 128, 128});
    for (auto& v : gt.data) v = rng.coin() ? 1.f : 0.f;
    Tape<float> tape;
    Workspace<float> ws(tape, store);
    auto out = ops::forward_full(ws, img, cfg);
    auto tl = ops::total_loss(out.mask_logits, gt);
    tape.backward(tl.total);
    bool fine = std::isfinite(tl.report.total);
    for (const auto& [name, g] : ws.gradients()) fine = fine && all_finite(g);
    ok[i] = fine ? 1 : 0;
  });
  for (int i = 0; i < 100; ++i) REQUIRE(ok[i] == 1);
}

TEST_CASE("whole-network gradcheck at 64x64 with tiny widths") {
  auto cases = verify::full_checks<double>();
  for (auto& c : cases) {
    auto rep = gradcheck(c.graph, c.bindings, 1e-4, c.max_elems);
    INFO(c.name << " max_rel_err=" << rep.max_rel_err << " worst=" << rep.worst_leaf);
    REQUIRE(rep.pass);
  }
}
