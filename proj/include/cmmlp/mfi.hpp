#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cmmlp/init.hpp"
#include "cmmlp/nn.hpp"
#include "cmmlp/partition.hpp"

namespace cmmlp {

enum class MfiVariant { Series, PP, CP };

inline MfiVariant mfi_variant_from_string(const std::string& s) {
  if (s == "series") return MfiVariant::Series;
  if (s == "pp") return MfiVariant::PP;
  if (s == "cp") return MfiVariant::CP;
  throw std::invalid_argument("unknown MFI variant '" + s + "' (series|pp|cp)");
}

// Per-stage (g_k, b_k) pairs for a square feature map of side S, with
// g_k * b_k == S throughout and g strictly decreasing.
struct CascadeSchedule {
  int side = 0;
  std::vector<std::pair<int, int>> stages;  // (g, b)

  CascadeSchedule(int side_, std::vector<std::pair<int, int>> stages_)
      : side(side_), stages(std::move(stages_)) {
    if (stages.empty()) throw std::invalid_argument("CascadeSchedule: at least one stage required");
    int prev_g = 0;
    for (size_t k = 0; k < stages.size(); ++k) {
      auto [g, b] = stages[k];
      if (g < 1 || b < 1 || g * b != side)
        throw std::invalid_argument("CascadeSchedule: stage " + std::to_string(k) + " has g*b=" +
                                    std::to_string(g * b) + " != side " + std::to_string(side));
      if (k > 0 && g >= prev_g)
        throw std::invalid_argument("CascadeSchedule: g must be strictly decreasing, got " +
                                    std::to_string(prev_g) + " then " + std::to_string(g));
      prev_g = g;
    }
  }

  // Halving schedule: up to three stages g_k = S/2^k, b_k = 2^k, stopping
  // before the grid degenerates. Sides without a valid halving stage get a
  // single dense-global stage (g=S, b=1).
  static CascadeSchedule for_side(int S) {
    std::vector<std::pair<int, int>> st;
    for (int k = 1; k <= 3; ++k) {
      int b = 1 << k;
      if (S % b != 0) break;
      int g = S / b;
      if (g < 2) break;
      st.emplace_back(g, b);
    }
    if (st.empty()) st.emplace_back(S, 1);
    return CascadeSchedule(S, std::move(st));
  }

  int depth() const { return static_cast<int>(stages.size()); }
};

namespace ops {

// Long-range mixing: FC across the g*g patch positions, channels untouched.
template <typename T>
inline Var<T> global_mlp(Workspace<T>& ws, Var<T> x, int g, const std::string& prefix) {
  const Shape& s = x.value().shape;
  int H = s[1], W = s[2];
  Var<T> t = grid(x, g);
  int n = g * g;
  Var<T> w = ws.param(prefix + ".w", {n, n}, InitKind::FanInNormal, n);
  Var<T> b = ws.param(prefix + ".b", {n}, InitKind::Zeros, n);
  return ungrid(fc_axis(t, w, b, 0), g, H, W);
}

// Local mixing: FC within each b*b patch, channels untouched.
template <typename T>
inline Var<T> local_mlp(Workspace<T>& ws, Var<T> x, int b, const std::string& prefix) {
  const Shape& s = x.value().shape;
  int H = s[1], W = s[2];
  Var<T> t = block(x, b);
  int n = b * b;
  Var<T> w = ws.param(prefix + ".w", {n, n}, InitKind::FanInNormal, n);
  Var<T> bb = ws.param(prefix + ".b", {n}, InitKind::Zeros, n);
  return unblock(fc_axis(t, w, bb, 1), b, H, W);
}

// One cascade stage. Series: Global then Local, a ReLU after each. PP: the
// two act on the stage input in parallel and are summed.
template <typename T>
inline Var<T> cascade_mlp(Workspace<T>& ws, Var<T> x, int g, int b, const std::string& prefix,
                          bool use_global = true, bool use_local = true, bool parallel = false) {
  if (!use_global && !use_local) return x;
  if (parallel && use_global && use_local) {
    Var<T> gpath = relu(global_mlp(ws, x, g, prefix + ".global"));
    Var<T> lpath = relu(local_mlp(ws, x, b, prefix + ".local"));
    return add(gpath, lpath);
  }
  Var<T> h = x;
  if (use_global) h = relu(global_mlp(ws, h, g, prefix + ".global"));
  if (use_local) h = relu(local_mlp(ws, h, b, prefix + ".local"));
  return h;
}

struct MfiToggles {
  bool use_global = true;
  bool use_local = true;
  MfiVariant variant = MfiVariant::Series;
};

namespace detail {
template <typename T>
inline Var<T> mfi_branch(Workspace<T>& ws, Var<T> f1, const CascadeSchedule& sched,
                         const MfiToggles& tg, const std::string& prefix) {
  bool stage_parallel = tg.variant == MfiVariant::PP;
  if (tg.variant == MfiVariant::CP) {
    // cascades act in parallel on the branch input and are summed
    Var<T> acc{};
    for (int k = 0; k < sched.depth(); ++k) {
      auto [g, b] = sched.stages[k];
      Var<T> c = cascade_mlp(ws, f1, g, b, prefix + ".k" + std::to_string(k), tg.use_global,
                             tg.use_local, false);
      acc = k == 0 ? c : add(acc, c);
    }
    return acc;
  }
  Var<T> h = f1;
  for (int k = 0; k < sched.depth(); ++k) {
    auto [g, b] = sched.stages[k];
    h = cascade_mlp(ws, h, g, b, prefix + ".k" + std::to_string(k), tg.use_global, tg.use_local,
                    stage_parallel);
  }
  return h;
}
}  // namespace detail

// Two-branch multi-scale interaction: channel split, per-branch cascades,
// cross gating, 1x1 fusion back to C channels.
template <typename T>
inline Var<T> mfi_block(Workspace<T>& ws, Var<T> f, const CascadeSchedule& sched,
                        const MfiToggles& tg, const std::string& prefix) {
  const Shape s = f.value().shape;
  if (s.size() != 3 || s[1] != sched.side || s[2] != sched.side)
    throw std::invalid_argument("mfi_block: feature " + shape_str(s) + " does not match schedule side " +
                                std::to_string(sched.side));
  int C = s[0];
  if (C % 2 != 0) throw std::invalid_argument("mfi_block: channel count must be even, got " + std::to_string(C));

  auto [f1_up, f1_bot] = split_channels(f, C / 2);
  Var<T> up = detail::mfi_branch(ws, f1_up, sched, tg, prefix + ".up");
  Var<T> bot = detail::mfi_branch(ws, f1_bot, sched, tg, prefix + ".bottom");

  // cross gating; the bottom aggregate feeds the up aggregate
  Var<T> ff_bot = add(f1_bot, mul(bot, up));
  Var<T> ff_up = add(add(f1_up, mul(up, bot)), ff_bot);

  Var<T> cat = concat_channels<T>({ff_up, ff_bot});
  Var<T> w = ws.param(prefix + ".fuse.w", {C, C, 1, 1}, InitKind::FanInNormal, C);
  Var<T> b = ws.param(prefix + ".fuse.b", {C}, InitKind::Zeros, C);
  return conv2d(cat, w, b, 1, 0);
}

}  // namespace ops
}  // namespace cmmlp
