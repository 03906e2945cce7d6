#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "cmmlp/init.hpp"

namespace cmmlp {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts unsupported");

namespace detail {

constexpr char kCheckpointMagic[4] = {'C', 'M', 'M', 'L'};
constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
constexpr uint8_t dtype_tag() {
  if constexpr (std::is_same_v<T, float>) return 0;
  else return 1;
}

template <typename V>
inline void write_pod(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
inline V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace detail

// Layout: magic 'CMML', version u32, tensor count u32, then per tensor:
// name length u16 + UTF-8 name, dtype tag u8 (0=f32, 1=f64), rank u8,
// extents u32 each, raw little-endian scalars.
template <typename T>
inline void save_checkpoint(const ParamStore<T>& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
  os.write(detail::kCheckpointMagic, 4);
  detail::write_pod<uint32_t>(os, detail::kCheckpointVersion);
  detail::write_pod<uint32_t>(os, static_cast<uint32_t>(store.size()));
  for (const auto& [name, t] : store) {
    detail::write_pod<uint16_t>(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<uint8_t>(os, detail::dtype_tag<T>());
    detail::write_pod<uint8_t>(os, static_cast<uint8_t>(t.rank()));
    for (int e : t.shape) detail::write_pod<uint32_t>(os, static_cast<uint32_t>(e));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

// Dtype tag of the tensors in a checkpoint (they are uniform per file).
inline int checkpoint_dtype(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, detail::kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  uint32_t version = detail::read_pod<uint32_t>(is);
  if (version != detail::kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  uint32_t count = detail::read_pod<uint32_t>(is);
  if (count == 0) return detail::dtype_tag<float>();
  uint16_t len = detail::read_pod<uint16_t>(is);
  is.seekg(len, std::ios::cur);
  return detail::read_pod<uint8_t>(is);
}

template <typename T>
inline ParamStore<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, detail::kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  uint32_t version = detail::read_pod<uint32_t>(is);
  if (version != detail::kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  uint32_t count = detail::read_pod<uint32_t>(is);
  ParamStore<T> store;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = detail::read_pod<uint16_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    uint8_t tag = detail::read_pod<uint8_t>(is);
    if (tag != detail::dtype_tag<T>())
      throw std::runtime_error("checkpoint: dtype tag " + std::to_string(tag) +
                               " does not match requested precision for '" + name + "'");
    uint8_t rank = detail::read_pod<uint8_t>(is);
    Shape shape(rank);
    for (int r = 0; r < rank; ++r) shape[r] = static_cast<int>(detail::read_pod<uint32_t>(is));
    Tensor<T> t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(T)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data for '" + name + "'");
    store.set(name, std::move(t));
  }
  return store;
}

}  // namespace cmmlp
