#pragma once

#include <set>

#include "cmmlp/gradcheck.hpp"
#include "cmmlp/loss.hpp"
#include "cmmlp/network.hpp"

namespace cmmlp {
namespace verify {

// One named gradient check: a graph plus bindings; the runner picks the
// tolerance. max_elems bounds the finite-difference probes per leaf for the
// expensive whole-network case. The suites cover every differentiable op;
// mask binarization lives in the metrics layer, outside the tape, and has no
// gradient contract to check.
template <typename T>
struct CheckCase {
  std::string name;
  Graph<T> graph;
  typename Graph<T>::Bindings bindings;
  int64_t max_elems = -1;
};

template <typename T>
inline Tensor<T> rand_uniform(Rng& rng, const Shape& s, double lo, double hi) {
  Tensor<T> t(s);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// symmetric values with |v| in [min_abs, max_abs]; keeps FD probes away from
// relu kinks and division blowups
template <typename T>
inline Tensor<T> rand_away(Rng& rng, const Shape& s, double min_abs, double max_abs) {
  Tensor<T> t(s);
  for (auto& v : t.data) {
    double m = rng.uniform(min_abs, max_abs);
    v = static_cast<T>(rng.coin() ? m : -m);
  }
  return t;
}

template <typename T>
inline Tensor<T> rand_binary(Rng& rng, const Shape& s) {
  Tensor<T> t(s);
  for (auto& v : t.data) v = rng.coin() ? T(1) : T(0);
  return t;
}

namespace detail {

// Wraps a graph body with a fixed random-weighted sum so the output is a
// scalar with non-uniform upstream gradients.
template <typename T>
inline CheckCase<T> make_case(std::string name, std::vector<LeafSpec> leaves,
                              typename Graph<T>::Bindings bindings,
                              typename Graph<T>::Builder body, uint64_t seed,
                              int64_t max_elems = -1) {
  Shape out_shape;
  {
    Graph<T> probe(leaves, body);
    out_shape = probe.forward(bindings).shape;
  }
  Rng rng(hash_name(seed, name + ":reduce"));
  Tensor<T> weights = rand_uniform<T>(rng, out_shape, -1.0, 1.0);
  typename Graph<T>::Builder wrapped = [body, weights](Tape<T>& t,
                                                       const typename Graph<T>::LeafVars& lv) {
    return ops::sum(ops::mul_const(body(t, lv), weights));
  };
  return {std::move(name), Graph<T>(std::move(leaves), std::move(wrapped)), std::move(bindings),
          max_elems};
}

// Module case: run the module once against a scratch store to discover its
// parameters, then expose inputs and parameters alike as graph leaves.
template <typename T>
inline CheckCase<T> make_module_case(
    std::string name, std::vector<std::pair<std::string, Shape>> inputs,
    std::function<Var<T>(Workspace<T>&, const std::map<std::string, Var<T>>&)> body, uint64_t seed,
    int64_t max_elems = -1,
    std::function<Tensor<T>(Rng&, const std::string&, const Shape&)> input_gen = nullptr) {
  ParamStore<T> proto(hash_name(seed, name + ":params"));
  typename Graph<T>::Bindings bindings;
  std::vector<LeafSpec> leaves;
  Rng rng(hash_name(seed, name + ":inputs"));
  {
    Tape<T> tape;
    Workspace<T> ws(tape, proto);
    std::map<std::string, Var<T>> ins;
    for (const auto& [n, shp] : inputs) {
      Tensor<T> v = input_gen ? input_gen(rng, n, shp) : rand_uniform<T>(rng, shp, -1.0, 1.0);
      bindings[n] = v;
      ins[n] = ws.input(v, true, n);
      leaves.push_back({n, shp, true});
    }
    body(ws, ins);
  }
  std::set<std::string> input_names;
  for (const auto& [n, shp] : inputs) input_names.insert(n);
  // Jitter every parameter off its initialized value: zero-init biases would
  // otherwise park ReLU inputs exactly on the kink, where central
  // differences and the subgradient legitimately disagree.
  Rng jitter(hash_name(seed, name + ":jitter"));
  for (const auto& [pname, pt] : proto) {
    leaves.push_back({pname, pt.shape, true});
    Tensor<T> v = pt;
    for (auto& e : v.data) e += static_cast<T>(jitter.uniform(-0.15, 0.15));
    bindings[pname] = v;
  }
  typename Graph<T>::Builder graph_body = [body, input_names](
                                              Tape<T>& tape,
                                              const typename Graph<T>::LeafVars& lv) {
    ParamStore<T> unused(0);
    Workspace<T> ws(tape, unused);
    std::map<std::string, Var<T>> ins;
    for (const auto& [n, v] : lv) {
      if (input_names.count(n))
        ins[n] = v;
      else
        ws.bind_external(n, v);
    }
    return body(ws, ins);
  };
  return make_case<T>(std::move(name), std::move(leaves), std::move(bindings),
                      std::move(graph_body), seed, max_elems);
}

}  // namespace detail

template <typename T>
inline std::vector<CheckCase<T>> primitive_checks(uint64_t seed = 11) {
  using Bindings = typename Graph<T>::Bindings;
  using LeafVars = typename Graph<T>::LeafVars;
  std::vector<CheckCase<T>> out;
  Rng rng(seed);

  auto unary = [&](const std::string& base, auto fn, const std::vector<Shape>& shapes,
                   double lo = -1.0, double hi = 1.0, bool away = false) {
    for (size_t i = 0; i < shapes.size(); ++i) {
      Bindings b;
      b["x"] = away ? rand_away<T>(rng, shapes[i], 0.2, 1.2) : rand_uniform<T>(rng, shapes[i], lo, hi);
      out.push_back(detail::make_case<T>(
          base + "#" + std::to_string(i), {{"x", shapes[i], true}}, std::move(b),
          [fn](Tape<T>&, const LeafVars& lv) { return fn(lv.at("x")); }, seed + i));
    }
  };
  auto binary = [&](const std::string& base, auto fn, const std::vector<Shape>& shapes,
                    bool b_away = false) {
    for (size_t i = 0; i < shapes.size(); ++i) {
      Bindings b;
      b["x"] = rand_uniform<T>(rng, shapes[i], -1.0, 1.0);
      b["y"] = b_away ? rand_away<T>(rng, shapes[i], 0.5, 1.5)
                      : rand_uniform<T>(rng, shapes[i], -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          base + "#" + std::to_string(i), {{"x", shapes[i], true}, {"y", shapes[i], true}},
          std::move(b), [fn](Tape<T>&, const LeafVars& lv) { return fn(lv.at("x"), lv.at("y")); },
          seed + 31 * i));
    }
  };

  const std::vector<Shape> pool = {{2, 3, 4}, {7}, {4, 5}};
  binary("add", [](Var<T> a, Var<T> b) { return ops::add(a, b); }, pool);
  binary("sub", [](Var<T> a, Var<T> b) { return ops::sub(a, b); }, pool);
  binary("mul", [](Var<T> a, Var<T> b) { return ops::mul(a, b); }, pool);
  binary("div", [](Var<T> a, Var<T> b) { return ops::div(a, b); }, pool, true);
  unary("scale", [](Var<T> x) { return ops::scale(x, T(1.7)); }, pool);
  unary("add_const", [](Var<T> x) { return ops::add_const(x, T(0.9)); }, pool);
  unary("sum", [](Var<T> x) { return ops::sum(x); }, pool);
  unary("mean", [](Var<T> x) { return ops::mean(x); }, pool);
  unary("relu", [](Var<T> x) { return ops::relu(x); }, pool, 0, 0, true);
  unary("sigmoid", [](Var<T> x) { return ops::sigmoid(x); }, {{2, 3, 4}, {9}, {3, 5}}, -3.0, 3.0);
  unary("reshape", [](Var<T> x) { return ops::reshape(x, {x.value().numel() > 11 ? 12 : 1, 2}); },
        {{2, 3, 4}, {1, 2}});

  {  // mul_const with a fixed coefficient tensor
    for (size_t i = 0; i < pool.size(); ++i) {
      Tensor<T> w = rand_uniform<T>(rng, pool[i], -2.0, 2.0);
      Bindings b;
      b["x"] = rand_uniform<T>(rng, pool[i], -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "mul_const#" + std::to_string(i), {{"x", pool[i], true}}, std::move(b),
          [w](Tape<T>&, const LeafVars& lv) { return ops::mul_const(lv.at("x"), w); }, seed + i));
    }
  }
  {  // bce on logits against fixed binary targets
    const std::vector<Shape> shapes = {{1, 4, 4}, {9}, {2, 3, 3}};
    for (size_t i = 0; i < shapes.size(); ++i) {
      Tensor<T> tgt = rand_binary<T>(rng, shapes[i]);
      Bindings b;
      b["x"] = rand_uniform<T>(rng, shapes[i], -3.0, 3.0);
      out.push_back(detail::make_case<T>(
          "bce_with_logits#" + std::to_string(i), {{"x", shapes[i], true}}, std::move(b),
          [tgt](Tape<T>&, const LeafVars& lv) { return ops::bce_with_logits(lv.at("x"), tgt); },
          seed + i));
    }
  }

  {  // conv2d shapes: 3x3 s1, 3x3 s2, 1x1
    struct Cv {
      Shape x, w;
      int stride, pad;
    };
    const std::vector<Cv> cases = {{{2, 4, 4}, {2, 2, 3, 3}, 1, 1},
                                   {{2, 6, 6}, {2, 2, 3, 3}, 2, 1},
                                   {{3, 4, 4}, {3, 3, 1, 1}, 1, 0}};
    for (size_t i = 0; i < cases.size(); ++i) {
      const Cv& c = cases[i];
      Bindings b;
      b["x"] = rand_uniform<T>(rng, c.x, -1.0, 1.0);
      b["w"] = rand_uniform<T>(rng, c.w, -1.0, 1.0);
      b["b"] = rand_uniform<T>(rng, {c.w[0]}, -0.5, 0.5);
      int stride = c.stride, pad = c.pad;
      out.push_back(detail::make_case<T>(
          "conv2d#" + std::to_string(i),
          {{"x", c.x, true}, {"w", c.w, true}, {"b", {c.w[0]}, true}}, std::move(b),
          [stride, pad](Tape<T>&, const LeafVars& lv) {
            return ops::conv2d(lv.at("x"), lv.at("w"), lv.at("b"), stride, pad);
          },
          seed + 7 * i));
    }
  }

  {  // fc_axis over both axes
    struct Fc {
      Shape x;
      int axis;
    };
    const std::vector<Fc> cases = {{{4, 3, 2}, 0}, {{3, 4, 2}, 1}, {{2, 5, 3}, 0}};
    for (size_t i = 0; i < cases.size(); ++i) {
      int n = cases[i].x[cases[i].axis];
      int axis = cases[i].axis;
      Bindings b;
      b["x"] = rand_uniform<T>(rng, cases[i].x, -1.0, 1.0);
      b["w"] = rand_uniform<T>(rng, {n, n}, -1.0, 1.0);
      b["b"] = rand_uniform<T>(rng, {n}, -0.5, 0.5);
      out.push_back(detail::make_case<T>(
          "fc_axis#" + std::to_string(i),
          {{"x", cases[i].x, true}, {"w", {n, n}, true}, {"b", {n}, true}}, std::move(b),
          [axis](Tape<T>&, const LeafVars& lv) {
            return ops::fc_axis(lv.at("x"), lv.at("w"), lv.at("b"), axis);
          },
          seed + 13 * i));
    }
  }

  {  // bilinear resize up, down, same
    struct Rz {
      Shape x;
      int ho, wo;
    };
    const std::vector<Rz> cases = {{{2, 3, 3}, 5, 7}, {{1, 6, 6}, 3, 3}, {{2, 4, 5}, 4, 5}};
    for (size_t i = 0; i < cases.size(); ++i) {
      Bindings b;
      b["x"] = rand_uniform<T>(rng, cases[i].x, -1.0, 1.0);
      int ho = cases[i].ho, wo = cases[i].wo;
      out.push_back(detail::make_case<T>(
          "resize_bilinear#" + std::to_string(i), {{"x", cases[i].x, true}}, std::move(b),
          [ho, wo](Tape<T>&, const LeafVars& lv) { return ops::resize_bilinear(lv.at("x"), ho, wo); },
          seed + i));
    }
  }

  {  // concat of two maps
    const std::vector<std::pair<Shape, Shape>> cases = {
        {{2, 3, 3}, {3, 3, 3}}, {{1, 2, 4}, {1, 2, 4}}, {{4, 2, 2}, {2, 2, 2}}};
    for (size_t i = 0; i < cases.size(); ++i) {
      Bindings b;
      b["x"] = rand_uniform<T>(rng, cases[i].first, -1.0, 1.0);
      b["y"] = rand_uniform<T>(rng, cases[i].second, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "concat_channels#" + std::to_string(i),
          {{"x", cases[i].first, true}, {"y", cases[i].second, true}}, std::move(b),
          [](Tape<T>&, const LeafVars& lv) {
            return ops::concat_channels<T>({lv.at("x"), lv.at("y")});
          },
          seed + i));
    }
  }

  {  // split halves weighted differently so routing errors show
    const std::vector<std::pair<Shape, int>> cases = {{{5, 3, 3}, 2}, {{4, 2, 2}, 1}, {{6, 2, 3}, 3}};
    for (size_t i = 0; i < cases.size(); ++i) {
      const Shape& xs = cases[i].first;
      int at = cases[i].second;
      Tensor<T> wa = rand_uniform<T>(rng, {at, xs[1], xs[2]}, -1.0, 1.0);
      Tensor<T> wb = rand_uniform<T>(rng, {xs[0] - at, xs[1], xs[2]}, -1.0, 1.0);
      Bindings b;
      b["x"] = rand_uniform<T>(rng, xs, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "split_channels#" + std::to_string(i), {{"x", xs, true}}, std::move(b),
          [at, wa, wb](Tape<T>&, const LeafVars& lv) {
            auto [a, c] = ops::split_channels(lv.at("x"), at);
            return ops::add(ops::sum(ops::mul_const(a, wa)), ops::sum(ops::mul_const(c, wb)));
          },
          seed + i));
    }
  }

  {  // partition rearrangements
    struct Pt {
      Shape x;
      int f;
    };
    const std::vector<Pt> gcases = {{{2, 8, 8}, 4}, {{3, 4, 4}, 2}, {{1, 6, 6}, 3}};
    for (size_t i = 0; i < gcases.size(); ++i) {
      Bindings b;
      b["x"] = rand_uniform<T>(rng, gcases[i].x, -1.0, 1.0);
      int g = gcases[i].f, H = gcases[i].x[1], W = gcases[i].x[2];
      out.push_back(detail::make_case<T>(
          "grid_ungrid#" + std::to_string(i), {{"x", gcases[i].x, true}}, std::move(b),
          [g, H, W](Tape<T>&, const LeafVars& lv) {
            return ops::ungrid(ops::grid(lv.at("x"), g), g, H, W);
          },
          seed + i));
      Bindings b2;
      b2["x"] = rand_uniform<T>(rng, gcases[i].x, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "grid#" + std::to_string(i), {{"x", gcases[i].x, true}}, std::move(b2),
          [g](Tape<T>&, const LeafVars& lv) { return ops::grid(lv.at("x"), g); }, seed + 3 * i));
      Bindings b3;
      b3["x"] = rand_uniform<T>(rng, gcases[i].x, -1.0, 1.0);
      int bb = gcases[i].f;
      out.push_back(detail::make_case<T>(
          "block_unblock#" + std::to_string(i), {{"x", gcases[i].x, true}}, std::move(b3),
          [bb, H, W](Tape<T>&, const LeafVars& lv) {
            return ops::unblock(ops::block(lv.at("x"), bb), bb, H, W);
          },
          seed + 5 * i));
      Bindings b4;
      b4["x"] = rand_uniform<T>(rng, gcases[i].x, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "block#" + std::to_string(i), {{"x", gcases[i].x, true}}, std::move(b4),
          [bb](Tape<T>&, const LeafVars& lv) { return ops::block(lv.at("x"), bb); }, seed + 7 * i));
    }
  }

  {  // permutations
    const std::vector<std::array<int, 3>> perms = {{2, 1, 0}, {1, 2, 0}, {2, 0, 1}};
    for (size_t i = 0; i < perms.size(); ++i) {
      Shape xs = {2, 3, 4};
      Bindings b;
      b["x"] = rand_uniform<T>(rng, xs, -1.0, 1.0);
      auto p = perms[i];
      out.push_back(detail::make_case<T>(
          "permute3#" + std::to_string(i), {{"x", xs, true}}, std::move(b),
          [p](Tape<T>&, const LeafVars& lv) { return ops::permute3(lv.at("x"), p[0], p[1], p[2]); },
          seed + i));
    }
  }

  {  // batched matmul
    const std::vector<std::pair<Shape, Shape>> cases = {
        {{2, 3, 4}, {2, 4, 5}}, {{1, 1, 3}, {1, 3, 1}}, {{3, 2, 2}, {3, 2, 2}}};
    for (size_t i = 0; i < cases.size(); ++i) {
      Bindings b;
      b["x"] = rand_uniform<T>(rng, cases[i].first, -1.0, 1.0);
      b["y"] = rand_uniform<T>(rng, cases[i].second, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "bmatmul#" + std::to_string(i),
          {{"x", cases[i].first, true}, {"y", cases[i].second, true}}, std::move(b),
          [](Tape<T>&, const LeafVars& lv) { return ops::bmatmul(lv.at("x"), lv.at("y")); },
          seed + i));
    }
  }

  unary("softmax_last", [](Var<T> x) { return ops::softmax_last(x); },
        {{2, 3, 4}, {1, 1, 5}, {4, 2, 2}}, -2.0, 2.0);
  unary("transpose12", [](Var<T> x) { return ops::transpose12(x); }, {{2, 3, 4}, {1, 5, 2}, {3, 2, 2}});

  {  // shared last-axis projection
    const std::vector<Shape> cases = {{2, 3, 4}, {1, 5, 2}, {3, 2, 3}};
    for (size_t i = 0; i < cases.size(); ++i) {
      int C = cases[i][2];
      Bindings b;
      b["x"] = rand_uniform<T>(rng, cases[i], -1.0, 1.0);
      b["w"] = rand_uniform<T>(rng, {C, C}, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "mix_last#" + std::to_string(i), {{"x", cases[i], true}, {"w", {C, C}, true}},
          std::move(b),
          [](Tape<T>&, const LeafVars& lv) { return ops::mix_last(lv.at("x"), lv.at("w")); },
          seed + i));
    }
  }

  {  // mask broadcast multiply and channel bias
    const std::vector<Shape> cases = {{3, 4, 5}, {1, 2, 2}, {2, 3, 3}};
    for (size_t i = 0; i < cases.size(); ++i) {
      Shape ms = {1, cases[i][1], cases[i][2]};
      Bindings b;
      b["x"] = rand_uniform<T>(rng, cases[i], -1.0, 1.0);
      b["m"] = rand_uniform<T>(rng, ms, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "mul_mask#" + std::to_string(i), {{"x", cases[i], true}, {"m", ms, true}}, std::move(b),
          [](Tape<T>&, const LeafVars& lv) { return ops::mul_mask(lv.at("x"), lv.at("m")); },
          seed + i));
      Bindings b2;
      b2["x"] = rand_uniform<T>(rng, cases[i], -1.0, 1.0);
      b2["b"] = rand_uniform<T>(rng, {cases[i][0]}, -1.0, 1.0);
      out.push_back(detail::make_case<T>(
          "add_bias_channel#" + std::to_string(i),
          {{"x", cases[i], true}, {"b", {cases[i][0]}, true}}, std::move(b2),
          [](Tape<T>&, const LeafVars& lv) { return ops::add_bias_channel(lv.at("x"), lv.at("b")); },
          seed + i));
    }
  }

  return out;
}

template <typename T>
inline std::vector<CheckCase<T>> block_checks(uint64_t seed = 17) {
  using Vars = std::map<std::string, Var<T>>;
  std::vector<CheckCase<T>> out;

  out.push_back(detail::make_module_case<T>(
      "global_mlp", {{"x", {2, 8, 8}}},
      [](Workspace<T>& ws, const Vars& in) { return ops::global_mlp(ws, in.at("x"), 4, "gm"); },
      seed));
  out.push_back(detail::make_module_case<T>(
      "local_mlp", {{"x", {2, 8, 8}}},
      [](Workspace<T>& ws, const Vars& in) { return ops::local_mlp(ws, in.at("x"), 4, "lm"); },
      seed + 1));
  out.push_back(detail::make_module_case<T>(
      "cascade_mlp", {{"x", {2, 8, 8}}},
      [](Workspace<T>& ws, const Vars& in) { return ops::cascade_mlp(ws, in.at("x"), 4, 2, "cm"); },
      seed + 2));

  for (auto [variant, vname] : {std::pair{MfiVariant::Series, "series"},
                                std::pair{MfiVariant::PP, "pp"}, std::pair{MfiVariant::CP, "cp"}}) {
    MfiVariant v = variant;
    out.push_back(detail::make_module_case<T>(
        std::string("mfi_block_") + vname, {{"x", {4, 8, 8}}},
        [v](Workspace<T>& ws, const Vars& in) {
          return ops::mfi_block(ws, in.at("x"), CascadeSchedule::for_side(8), {true, true, v}, "mfi");
        },
        seed + 3));
  }

  out.push_back(detail::make_module_case<T>(
      "axial_attention", {{"x", {2, 3, 4}}},
      [](Workspace<T>& ws, const Vars& in) { return ops::axial_attention(ws, in.at("x"), "attn"); },
      seed + 4));

  out.push_back(detail::make_module_case<T>(
      "acre_block", {{"x", {2, 4, 4}}, {"m", {1, 4, 4}}},
      [](Workspace<T>& ws, const Vars& in) {
        return ops::acre_block(ws, in.at("x"), in.at("m"), "acre");
      },
      seed + 5, -1,
      [](Rng& rng, const std::string& name, const Shape& s) {
        return name == "m" ? rand_uniform<T>(rng, s, -2.0, 2.0) : rand_uniform<T>(rng, s, -1.0, 1.0);
      }));

  {
    ModelConfig cfg;
    cfg.decoder_width = 4;
    out.push_back(detail::make_module_case<T>(
        "partial_decode", {{"f1", {4, 2, 2}}, {"f2", {3, 4, 4}}, {"f3", {2, 8, 8}}},
        [cfg](Workspace<T>& ws, const Vars& in) {
          return ops::partial_decode(ws, in.at("f1"), in.at("f2"), in.at("f3"), cfg);
        },
        seed + 6));
  }

  {  // deep-supervision loss over four scales against a fixed binary mask
    Rng rng(hash_name(seed, "total_loss"));
    Tensor<T> gt = rand_binary<T>(rng, {1, 16, 16});
    out.push_back(detail::make_module_case<T>(
        "total_loss",
        {{"m0", {1, 2, 2}}, {"m1", {1, 4, 4}}, {"m2", {1, 8, 8}}, {"m3", {1, 16, 16}}},
        [gt](Workspace<T>&, const Vars& in) {
          return ops::total_loss<T>({in.at("m0"), in.at("m1"), in.at("m2"), in.at("m3")}, gt).total;
        },
        seed + 7, -1,
        [](Rng& r, const std::string&, const Shape& s) { return rand_uniform<T>(r, s, -2.0, 2.0); }));
  }

  return out;
}

// Whole network plus deep-supervision loss at 64x64 with tiny widths;
// finite differences probe a subsample of each leaf.
template <typename T>
inline std::vector<CheckCase<T>> full_checks(uint64_t seed = 23, int64_t max_elems = 6) {
  using Vars = std::map<std::string, Var<T>>;
  std::vector<CheckCase<T>> out;
  ModelConfig cfg;
  cfg.enc_widths = {2, 2, 4, 4, 8};
  cfg.decoder_width = 4;
  Rng rng(hash_name(seed, "full"));
  Tensor<T> gt = rand_binary<T>(rng, {1, 64, 64});
  out.push_back(detail::make_module_case<T>(
      "forward_full_64", {{"image", {3, 64, 64}}},
      [cfg, gt](Workspace<T>& ws, const Vars& in) {
        auto fo = ops::forward_full(ws, in.at("image"), cfg);
        return ops::total_loss(fo.mask_logits, gt).total;
      },
      seed, max_elems,
      [](Rng& r, const std::string&, const Shape& s) { return rand_uniform<T>(r, s, 0.0, 1.0); }));
  return out;
}

}  // namespace verify
}  // namespace cmmlp
