#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmmlp/image.hpp"
#include "cmmlp/synth.hpp"

namespace cmmlp {

// <root>/images/*.png and <root>/masks/*.png matched by filename stem.
// target_size <= 0 keeps native resolution (then all samples must agree).
inline std::vector<Sample> load_dir(const std::string& images_path, const std::string& masks_path,
                                    int target_size = 0) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(images_path)) throw std::runtime_error("load_dir: no such directory: " + images_path);
  if (!fs::is_directory(masks_path)) throw std::runtime_error("load_dir: no such directory: " + masks_path);

  std::map<std::string, fs::path> images, masks;
  for (const auto& e : fs::directory_iterator(images_path))
    if (e.is_regular_file() && e.path().extension() == ".png") images[e.path().stem().string()] = e.path();
  for (const auto& e : fs::directory_iterator(masks_path))
    if (e.is_regular_file() && e.path().extension() == ".png") masks[e.path().stem().string()] = e.path();

  for (const auto& [stem, p] : images)
    if (!masks.count(stem)) throw std::runtime_error("load_dir: missing mask for image '" + stem + "'");
  for (const auto& [stem, p] : masks)
    if (!images.count(stem)) throw std::runtime_error("load_dir: missing image for mask '" + stem + "'");

  std::vector<Sample> out;
  out.reserve(images.size());
  for (const auto& [stem, ipath] : images) {  // std::map iteration = id sort
    ImageU8 img = read_png(ipath.string());
    ImageU8 msk = read_png(masks.at(stem).string());
    if (!is_grayscale(msk))
      throw std::runtime_error("load_dir: non-grayscale mask '" + stem + "'");
    if (img.width != msk.width || img.height != msk.height)
      throw std::runtime_error("load_dir: image/mask size mismatch for '" + stem + "'");
    Sample s;
    s.id = stem;
    s.image = image_to_tensor(img);
    s.mask = mask_to_tensor(msk);
    if (target_size > 0 && (img.width != target_size || img.height != target_size)) {
      s.image = resize_image_bilinear(s.image, target_size, target_size);
      s.mask = resize_mask_nearest(s.mask, target_size, target_size);
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct DatasetSplit {
  std::vector<Sample> train, val, test;
};

// Deterministic shuffle then nearest-rounded sizes; train absorbs remainder.
inline DatasetSplit split_samples(std::vector<Sample> samples, uint64_t seed, int r_train = 7,
                                  int r_val = 1, int r_test = 2) {
  if (samples.empty()) throw std::invalid_argument("split_samples: empty sample list");
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
  Rng rng(hash_name(seed, "split"));
  for (size_t i = samples.size(); i > 1; --i)
    std::swap(samples[i - 1], samples[rng.bounded(i)]);

  int64_t n = static_cast<int64_t>(samples.size());
  double total = r_train + r_val + r_test;
  int64_t n_val = std::llround(n * r_val / total);
  int64_t n_test = std::llround(n * r_test / total);
  if (n_val + n_test > n) n_test = n - n_val;
  int64_t n_train = n - n_val - n_test;

  DatasetSplit out;
  out.train.assign(samples.begin(), samples.begin() + n_train);
  out.val.assign(samples.begin() + n_train, samples.begin() + n_train + n_val);
  out.test.assign(samples.begin() + n_train + n_val, samples.end());
  return out;
}

struct AugmentConfig {
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double p_affine = 0.5;
  double max_rot_deg = 15.0;
  double max_translate = 0.05;  // fraction of extent
  double scale_min = 0.9;
  double scale_max = 1.1;
};

inline Sample flip_horizontal(const Sample& s) {
  Sample out = s;
  int H = s.image.shape[1], W = s.image.shape[2];
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) out.image.at(c, y, x) = s.image.at(c, y, W - 1 - x);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) out.mask.at(0, y, x) = s.mask.at(0, y, W - 1 - x);
  return out;
}

inline Sample flip_vertical(const Sample& s) {
  Sample out = s;
  int H = s.image.shape[1], W = s.image.shape[2];
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) out.image.at(c, y, x) = s.image.at(c, H - 1 - y, x);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) out.mask.at(0, y, x) = s.mask.at(0, H - 1 - y, x);
  return out;
}

namespace detail {

// Inverse-warp by rotation+scale+translation about the image centre;
// bilinear for the image, nearest + re-binarize for the mask.
inline Sample warp_affine(const Sample& s, double rot_rad, double scale_f, double tx, double ty) {
  int H = s.image.shape[1], W = s.image.shape[2];
  Sample out = s;
  double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
  double cosr = std::cos(rot_rad) / scale_f, sinr = std::sin(rot_rad) / scale_f;
  auto src_of = [&](double dx, double dy, double& sx, double& sy) {
    double ux = dx - cx - tx, uy = dy - cy - ty;
    sx = cosr * ux + sinr * uy + cx;
    sy = -sinr * ux + cosr * uy + cy;
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double sx, sy;
      src_of(x, y, sx, sy);
      // image: bilinear with zero outside
      for (int c = 0; c < 3; ++c) {
        double v = 0;
        int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        double fx = sx - x0, fy = sy - y0;
        for (int dy2 = 0; dy2 <= 1; ++dy2)
          for (int dx2 = 0; dx2 <= 1; ++dx2) {
            int yy = y0 + dy2, xx = x0 + dx2;
            if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
            double wgt = (dx2 ? fx : 1 - fx) * (dy2 ? fy : 1 - fy);
            v += wgt * s.image.at(c, yy, xx);
          }
        out.image.at(c, y, x) = static_cast<float>(v);
      }
      int nx = static_cast<int>(std::lround(sx)), ny = static_cast<int>(std::lround(sy));
      float m = (nx >= 0 && nx < W && ny >= 0 && ny < H) ? s.mask.at(0, ny, nx) : 0.f;
      out.mask.at(0, y, x) = m >= 0.5f ? 1.f : 0.f;
    }
  return out;
}

}  // namespace detail

inline Sample augment(const Sample& s, uint64_t seed, const AugmentConfig& cfg = {}) {
  Rng rng(hash_name(seed, "augment:" + s.id));
  Sample out = s;
  if (rng.coin(cfg.p_hflip)) out = flip_horizontal(out);
  if (rng.coin(cfg.p_vflip)) out = flip_vertical(out);
  if (rng.coin(cfg.p_affine)) {
    double rot = rng.uniform(-cfg.max_rot_deg, cfg.max_rot_deg) * 3.14159265358979323846 / 180.0;
    double sc = rng.uniform(cfg.scale_min, cfg.scale_max);
    int H = s.image.shape[1], W = s.image.shape[2];
    double tx = rng.uniform(-cfg.max_translate, cfg.max_translate) * W;
    double ty = rng.uniform(-cfg.max_translate, cfg.max_translate) * H;
    out = detail::warp_affine(out, rot, sc, tx, ty);
  }
  return out;
}

}  // namespace cmmlp
