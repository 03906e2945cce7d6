#pragma once

#include <array>
#include <string>

#include "cmmlp/acre.hpp"
#include "cmmlp/mfi.hpp"

namespace cmmlp {

struct ModelConfig {
  std::array<int, 5> enc_widths = {8, 16, 32, 64, 128};
  int decoder_width = 16;
  int in_channels = 3;
  bool use_mfi = true;
  bool use_local = true;
  bool use_global = true;
  bool use_acre = true;
  MfiVariant variant = MfiVariant::Series;

  ops::MfiToggles mfi_toggles() const { return {use_global, use_local, variant}; }
};

// Ablation names; '+' combines several in one setting.
inline void apply_setting(ModelConfig& cfg, const std::string& setting) {
  size_t start = 0;
  while (start <= setting.size()) {
    size_t plus = setting.find('+', start);
    std::string part = setting.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
    if (part == "full" || part.empty()) {
    } else if (part == "w/o-MFI" || part == "wo-mfi") {
      cfg.use_mfi = false;
    } else if (part == "w/o-Local" || part == "wo-local") {
      cfg.use_local = false;
    } else if (part == "w/o-Global" || part == "wo-global") {
      cfg.use_global = false;
    } else if (part == "w/o-ACRE" || part == "wo-acre") {
      cfg.use_acre = false;
    } else if (part == "MFI-PP" || part == "pp") {
      cfg.variant = MfiVariant::PP;
    } else if (part == "MFI-CP" || part == "cp") {
      cfg.variant = MfiVariant::CP;
    } else {
      throw std::invalid_argument("unknown ablation setting '" + part + "'");
    }
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
}

namespace ops {

template <typename T>
struct EncoderFeatures {
  std::array<Var<T>, 5> stages;  // 1/2 .. 1/32 resolution
  Var<T> f1() const { return stages[4]; }  // deepest, 1/32
  Var<T> f2() const { return stages[3]; }  // 1/16
  Var<T> f3() const { return stages[2]; }  // 1/8
};

namespace detail {
template <typename T>
inline Var<T> conv_layer(Workspace<T>& ws, Var<T> x, const std::string& prefix, int in_c, int out_c,
                         int k, int stride, int pad, bool with_relu) {
  ConvSpec spec{in_c, out_c, k, stride, pad, true};
  spec.validate();
  Var<T> w = ws.param(prefix + ".w", {out_c, in_c, k, k}, InitKind::FanInNormal, in_c * k * k);
  Var<T> b = ws.param(prefix + ".b", {out_c}, InitKind::Zeros, out_c);
  Var<T> y = conv2d(x, w, b, stride, pad);
  return with_relu ? relu(y) : y;
}
}  // namespace detail

// Five stages of stride-2 conv + ReLU + stride-1 conv + ReLU; spatial size
// halves per stage.
template <typename T>
inline EncoderFeatures<T> encode(Workspace<T>& ws, Var<T> image, const ModelConfig& cfg) {
  const Shape& s = image.value().shape;
  if (s.size() != 3 || s[0] != cfg.in_channels)
    throw std::invalid_argument("encode: image must be (" + std::to_string(cfg.in_channels) + ",H,W)");
  int H = s[1], W = s[2];
  if (H % 32 != 0 || W % 32 != 0 || H < 64 || W < 64)
    throw std::invalid_argument("encode: H and W must be divisible by 32 and >= 64, got " +
                                shape_str(s));
  EncoderFeatures<T> out;
  Var<T> x = image;
  int in_c = cfg.in_channels;
  for (int i = 0; i < 5; ++i) {
    std::string p = "enc.s" + std::to_string(i + 1);
    int out_c = cfg.enc_widths[i];
    x = detail::conv_layer(ws, x, p + ".conv1", in_c, out_c, 3, 2, 1, true);
    x = detail::conv_layer(ws, x, p + ".conv2", out_c, out_c, 3, 1, 1, true);
    out.stages[i] = x;
    in_c = out_c;
  }
  return out;
}

// Aggregate the three deepest stages into the initial coarse mask logits at
// 1/32 scale: lateral 1x1 reductions, gated top-down products, concat at
// 1/8, 1-channel fusion, two stride-2 downsampling convs.
template <typename T>
inline Var<T> partial_decode(Workspace<T>& ws, Var<T> f1, Var<T> f2, Var<T> f3,
                             const ModelConfig& cfg) {
  int P = cfg.decoder_width;
  int c1 = f1.value().shape[0], c2 = f2.value().shape[0], c3 = f3.value().shape[0];
  Var<T> t1 = detail::conv_layer(ws, f1, "pd.lat1", c1, P, 1, 1, 0, true);
  Var<T> t2 = detail::conv_layer(ws, f2, "pd.lat2", c2, P, 1, 1, 0, true);
  Var<T> t3 = detail::conv_layer(ws, f3, "pd.lat3", c3, P, 1, 1, 0, true);

  int h2 = f2.value().shape[1], w2 = f2.value().shape[2];
  int h3 = f3.value().shape[1], w3 = f3.value().shape[2];
  Var<T> a2 = mul(t2, resize_bilinear(t1, h2, w2));
  Var<T> u2 = resize_bilinear(a2, h3, w3);
  Var<T> a3 = mul(t3, u2);

  Var<T> cat = concat_channels<T>({resize_bilinear(t1, h3, w3), u2, a3});
  Var<T> m8 = detail::conv_layer(ws, cat, "pd.fuse", 3 * P, 1, 3, 1, 1, false);
  Var<T> m16 = detail::conv_layer(ws, m8, "pd.down1", 1, 1, 3, 2, 1, false);
  return detail::conv_layer(ws, m16, "pd.down2", 1, 1, 3, 2, 1, false);
}

// One parallel-branch step: feature interaction, mask refinement against the
// incoming mask, and the x2 upsampled next mask.
template <typename T>
inline std::pair<Var<T>, Var<T>> branch_step(Workspace<T>& ws, Var<T> feat, Var<T> m_prev,
                                             const ModelConfig& cfg, int branch_index) {
  std::string prefix = "br" + std::to_string(branch_index);
  const Shape fs = feat.value().shape;  // copy: recording reallocates node storage
  if (fs[1] != fs[2])
    throw std::invalid_argument("branch_step: square feature maps required, got " + shape_str(fs));

  Var<T> fprime = feat;
  if (cfg.use_mfi)
    fprime = mfi_block(ws, feat, CascadeSchedule::for_side(fs[1]), cfg.mfi_toggles(), prefix + ".mfi");

  Var<T> m_ref;
  if (cfg.use_acre) {
    m_ref = acre_block(ws, fprime, m_prev, prefix + ".acre");
  } else {
    m_ref = detail::conv_layer(ws, fprime, prefix + ".noacre", fs[0], 1, 3, 1, 1, false);
  }

  const Shape ms = m_prev.value().shape;
  Var<T> m_prev_here = (ms[1] == fs[1] && ms[2] == fs[2]) ? m_prev : resize_bilinear(m_prev, fs[1], fs[2]);
  Var<T> cat = concat_channels<T>({m_ref, m_prev_here});
  Var<T> fused = detail::conv_layer(ws, cat, prefix + ".refine", 2, 1, 3, 1, 1, false);
  Var<T> m_next = resize_bilinear(fused, fs[1] * 2, fs[2] * 2);
  return {m_ref, m_next};
}

template <typename T>
struct ForwardOutputs {
  std::array<Var<T>, 4> mask_logits;  // M0 (1/32) .. M3 (1/4)
  Var<T> mask_final;                  // probabilities at input resolution
};

template <typename T>
inline ForwardOutputs<T> forward_full(Workspace<T>& ws, Var<T> image, const ModelConfig& cfg) {
  int H = image.value().shape[1], W = image.value().shape[2];
  EncoderFeatures<T> enc = encode(ws, image, cfg);
  ForwardOutputs<T> out;
  out.mask_logits[0] = partial_decode(ws, enc.f1(), enc.f2(), enc.f3(), cfg);
  std::array<Var<T>, 3> feats = {enc.f1(), enc.f2(), enc.f3()};
  Var<T> m = out.mask_logits[0];
  for (int i = 0; i < 3; ++i) {
    auto [m_ref, m_next] = branch_step(ws, feats[i], m, cfg, i + 1);
    out.mask_logits[i + 1] = m_next;
    m = m_next;
  }
  out.mask_final = resize_bilinear(sigmoid(out.mask_logits[3]), H, W);
  return out;
}

template <typename T>
inline ForwardOutputs<T> forward_full(Workspace<T>& ws, const Tensor<T>& image, const ModelConfig& cfg) {
  return forward_full(ws, ws.input(image, false, "image"), cfg);
}

}  // namespace ops

// Create every parameter the configuration implies for the given input size
// (without needing real data); returns the total element count.
template <typename T>
inline int64_t materialize_params(ParamStore<T>& store, const ModelConfig& cfg, int H, int W) {
  Tape<T> tape;
  Workspace<T> ws(tape, store, false);
  ops::forward_full(ws, Tensor<T>::zeros({cfg.in_channels, H, W}), cfg);
  return store.total_elements();
}

}  // namespace cmmlp
