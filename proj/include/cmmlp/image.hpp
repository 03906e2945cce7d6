#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "cmmlp/tensor.hpp"

namespace cmmlp {

struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3, interleaved rows
  std::vector<uint8_t> pixels;
};

// Any PNG decodes to interleaved RGB; alpha is dropped.
inline ImageU8 read_png(const std::string& path) {
  png_image im;
  std::memset(&im, 0, sizeof(im));
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str()))
    throw std::runtime_error("read_png: cannot open '" + path + "': " + im.message);
  im.format = PNG_FORMAT_RGBA;
  std::vector<uint8_t> rgba(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, rgba.data(), 0, nullptr)) {
    png_image_free(&im);
    throw std::runtime_error("read_png: decode failed for '" + path + "': " + im.message);
  }
  ImageU8 out;
  out.width = static_cast<int>(im.width);
  out.height = static_cast<int>(im.height);
  out.channels = 3;
  out.pixels.resize(static_cast<size_t>(out.width) * out.height * 3);
  for (size_t i = 0, n = static_cast<size_t>(out.width) * out.height; i < n; ++i) {
    out.pixels[i * 3 + 0] = rgba[i * 4 + 0];
    out.pixels[i * 3 + 1] = rgba[i * 4 + 1];
    out.pixels[i * 3 + 2] = rgba[i * 4 + 2];
  }
  return out;
}

inline void write_png(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_png: 1 or 3 channels required");
  png_image im;
  std::memset(&im, 0, sizeof(im));
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(img.width);
  im.height = static_cast<png_uint_32>(img.height);
  im.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&im, path.c_str(), 0, img.pixels.data(), 0, nullptr))
    throw std::runtime_error("write_png: cannot write '" + path + "': " + im.message);
}

inline bool is_grayscale(const ImageU8& img) {
  if (img.channels == 1) return true;
  for (size_t i = 0, n = static_cast<size_t>(img.width) * img.height; i < n; ++i)
    if (img.pixels[i * 3] != img.pixels[i * 3 + 1] || img.pixels[i * 3] != img.pixels[i * 3 + 2])
      return false;
  return true;
}

// (3,H,W) float tensor in [0,1] from interleaved RGB.
inline Tensor<float> image_to_tensor(const ImageU8& img) {
  Tensor<float> t({3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) = img.pixels[(static_cast<size_t>(y) * img.width + x) * 3 + c] / 255.0f;
  return t;
}

// Mask binarized at >= 128 of 255 into a (1,H,W) 0/1 tensor.
inline Tensor<float> mask_to_tensor(const ImageU8& img) {
  Tensor<float> t({1, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      t.at(0, y, x) = img.pixels[(static_cast<size_t>(y) * img.width + x) * img.channels] >= 128 ? 1.f : 0.f;
  return t;
}

inline ImageU8 tensor_to_image(const Tensor<float>& t) {
  ImageU8 img;
  img.channels = t.shape[0] == 1 ? 1 : 3;
  img.height = t.shape[1];
  img.width = t.shape[2];
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        float v = std::clamp(t.at(c, y, x), 0.0f, 1.0f);
        img.pixels[(static_cast<size_t>(y) * img.width + x) * img.channels + c] =
            static_cast<uint8_t>(v * 255.0f + 0.5f);
      }
  return img;
}

// Plain-value resizes used by the data pipeline (not differentiated).
inline Tensor<float> resize_image_bilinear(const Tensor<float>& x, int Ho, int Wo) {
  int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  Tensor<float> out({C, Ho, Wo});
  double sy = static_cast<double>(H) / Ho, sx = static_cast<double>(W) / Wo;
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < Ho; ++oy) {
      double fy = (oy + 0.5) * sy - 0.5;
      int y0 = static_cast<int>(std::floor(fy));
      double dy = fy - y0;
      int ya = std::clamp(y0, 0, H - 1), yb = std::clamp(y0 + 1, 0, H - 1);
      for (int ox = 0; ox < Wo; ++ox) {
        double fx = (ox + 0.5) * sx - 0.5;
        int x0 = static_cast<int>(std::floor(fx));
        double dx = fx - x0;
        int xa = std::clamp(x0, 0, W - 1), xb = std::clamp(x0 + 1, 0, W - 1);
        double top = x.at(c, ya, xa) + (x.at(c, ya, xb) - x.at(c, ya, xa)) * dx;
        double bot = x.at(c, yb, xa) + (x.at(c, yb, xb) - x.at(c, yb, xa)) * dx;
        out.at(c, oy, ox) = static_cast<float>(top + (bot - top) * dy);
      }
    }
  return out;
}

inline Tensor<float> resize_mask_nearest(const Tensor<float>& x, int Ho, int Wo) {
  int H = x.shape[1], W = x.shape[2];
  Tensor<float> out({1, Ho, Wo});
  for (int oy = 0; oy < Ho; ++oy) {
    int y = std::min(H - 1, static_cast<int>((oy + 0.5) * H / Ho));
    for (int ox = 0; ox < Wo; ++ox) {
      int xx = std::min(W - 1, static_cast<int>((ox + 0.5) * W / Wo));
      out.at(0, oy, ox) = x.at(0, y, xx) >= 0.5f ? 1.f : 0.f;
    }
  }
  return out;
}

}  // namespace cmmlp
