#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cmmlp/rng.hpp"
#include "cmmlp/tensor.hpp"

namespace cmmlp {

struct Sample {
  std::string id;
  Tensor<float> image;  // (3,H,W) in [0,1]
  Tensor<float> mask;   // (1,H,W) strictly 0/1
};

// Wavy-boundary blob dataset. Masks are unions of star-convex blobs with
// radius r(theta) = r0 * (1 + sum_j a_j sin(f_j theta + phi_j)); images carry
// mask-correlated intensity plus smoothed noise so edges, not colors, carry
// the signal.
struct SynthSpec {
  uint64_t seed = 1;
  int count = 16;
  int size = 128;
  int blobs_min = 1;
  int blobs_max = 4;
  double amp_min = 0.10;  // per-harmonic amplitude range
  double amp_max = 0.22;
  int freq_min = 3;
  int freq_max = 8;
  double noise = 0.08;

  void validate() const {
    if (size < 32 || size % 32 != 0)
      throw std::invalid_argument("SynthSpec: size must be a positive multiple of 32");
    if (count < 1) throw std::invalid_argument("SynthSpec: count must be >= 1");
    if (blobs_min < 1 || blobs_max < blobs_min)
      throw std::invalid_argument("SynthSpec: bad blob count range");
  }
};

namespace detail {

struct Blob {
  double cx, cy, r0;
  std::vector<double> amp, freq, phase;
};

inline bool inside_blob(const Blob& b, double x, double y) {
  double dx = x - b.cx, dy = y - b.cy;
  double d = std::sqrt(dx * dx + dy * dy);
  double theta = std::atan2(dy, dx);
  double r = b.r0;
  double mod = 1.0;
  for (size_t j = 0; j < b.amp.size(); ++j) mod += b.amp[j] * std::sin(b.freq[j] * theta + b.phase[j]);
  return d <= r * mod;
}

inline Tensor<float> box_blur(const Tensor<float>& x, int radius) {
  int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  Tensor<float> out(x.shape);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        int y0 = std::max(0, y - radius), y1 = std::min(H - 1, y + radius);
        int x0 = std::max(0, xx - radius), x1 = std::min(W - 1, xx + radius);
        double acc = 0;
        for (int yy = y0; yy <= y1; ++yy)
          for (int xc = x0; xc <= x1; ++xc) acc += x.at(c, yy, xc);
        out.at(c, y, xx) = static_cast<float>(acc / ((y1 - y0 + 1) * (x1 - x0 + 1)));
      }
  return out;
}

}  // namespace detail

// One blob set per sample id; fully determined by (spec.seed, index).
inline Sample generate_sample(const SynthSpec& spec, int index) {
  Rng rng(hash_name(spec.seed, "sample" + std::to_string(index)));
  int S = spec.size;

  int nblobs = spec.blobs_min + static_cast<int>(rng.bounded(spec.blobs_max - spec.blobs_min + 1));
  std::vector<detail::Blob> blobs(nblobs);
  for (auto& b : blobs) {
    b.r0 = rng.uniform(0.10, 0.22) * S;
    double margin = b.r0 * 1.5;
    b.cx = rng.uniform(margin, S - margin);
    b.cy = rng.uniform(margin, S - margin);
    int harmonics = 2 + static_cast<int>(rng.bounded(2));
    for (int j = 0; j < harmonics; ++j) {
      b.amp.push_back(rng.uniform(spec.amp_min, spec.amp_max));
      b.freq.push_back(static_cast<double>(spec.freq_min + rng.bounded(spec.freq_max - spec.freq_min + 1)));
      b.phase.push_back(rng.uniform(0.0, 6.283185307179586));
    }
  }

  Sample s;
  s.id = "synth_" + std::string(index < 10 ? "000" : index < 100 ? "00" : index < 1000 ? "0" : "") +
         std::to_string(index);
  s.mask = Tensor<float>({1, S, S});
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      bool in = false;
      for (const auto& b : blobs)
        if (detail::inside_blob(b, x + 0.5, y + 0.5)) {
          in = true;
          break;
        }
      s.mask.at(0, y, x) = in ? 1.f : 0.f;
    }

  // intensity correlates with the smoothed mask; two noise scales on top
  Tensor<float> smooth = detail::box_blur(s.mask, 2);
  Tensor<float> coarse({1, S, S});
  for (auto& v : coarse.data) v = static_cast<float>(rng.normal());
  coarse = detail::box_blur(coarse, 4);

  double base = rng.uniform(0.25, 0.40);
  double contrast = rng.uniform(0.28, 0.40);
  double tint[3] = {rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04)};
  s.image = Tensor<float>({3, S, S});
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      double body = base + contrast * smooth.at(0, y, x) + spec.noise * coarse.at(0, y, x);
      for (int c = 0; c < 3; ++c) {
        double v = body + tint[c] + spec.noise * 0.5 * rng.normal();
        s.image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return s;
}

inline std::vector<Sample> generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) out.push_back(generate_sample(spec, i));
  return out;
}

}  // namespace cmmlp
