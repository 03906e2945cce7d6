#pragma once


#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmmlp {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

// Dense row-major N-d array. Immutable by convention once handed to the tape;
// tests and builders mutate freely before that.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)) {
    for (int e : shape) {
      if (e < 1) throw std::invalid_argument("Tensor: extent < 1 in shape " + shape_str(shape));
    }
    data.assign(static_cast<size_t>(shape_numel(shape)), T(0));
  }
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      throw std::invalid_argument("Tensor: data length does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  // rank-3 accessors cover nearly everything in this library: (C,H,W) maps
  // and (A,B,C) partition tensors.
  T& at(int a, int b, int c) {
    return data[(static_cast<size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  const T& at(int a, int b, int c) const {
    return data[(static_cast<size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  T& at(int a, int b) { return data[static_cast<size_t>(a) * shape[1] + b]; }
  const T& at(int a, int b) const { return data[static_cast<size_t>(a) * shape[1] + b]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
inline bool all_finite(const Tensor<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// FNV-1a over the raw little-endian value bytes; used for golden snapshots.
template <typename T>
inline uint64_t tensor_hash(const Tensor<T>& t) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const unsigned char* p, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (int e : t.shape) {
    uint32_t u = static_cast<uint32_t>(e);
    unsigned char b[4] = {static_cast<unsigned char>(u & 0xff), static_cast<unsigned char>((u >> 8) & 0xff),
                          static_cast<unsigned char>((u >> 16) & 0xff), static_cast<unsigned char>((u >> 24) & 0xff)};
    mix(b, 4);
  }
  mix(reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(T));
  return h;
}

}  // namespace cmmlp
