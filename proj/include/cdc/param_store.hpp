#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "cdc/errors.hpp"
#include "cdc/layers.hpp"

namespace cdc {

// Versioned binary parameter format:
//   magic "CDCP", version u16 LE, entry count u32 LE, then per entry:
//   name length u16 LE, UTF-8 name, rank u8, extents u32 LE each,
//   float32 values LE.
inline constexpr std::uint16_t kParamStoreVersion = 1;

namespace wire {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::uint8_t* p;
  std::size_t n;
  std::size_t pos = 0;

  void need(std::size_t k) const {
    if (pos + k > n) throw CorruptionError("truncated binary payload");
  }
  std::uint8_t u8() {
    need(1);
    return p[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[pos] | (p[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + pos), k);
    pos += k;
    return s;
  }
};

}  // namespace wire

// Named parameter snapshot; the unit of decoder upload and checkpointing.
struct ParamStore {
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
  };
  std::vector<Entry> entries;

  template <class T>
  static ParamStore from_network(Network<T>& net) {
    ParamStore store;
    for (auto* p : net.params()) {
      Entry e;
      e.name = p->name;
      e.shape = p->value.shape;
      e.values.reserve(p->value.numel());
      for (const auto& v : p->value.data) e.values.push_back(static_cast<float>(v));
      store.entries.push_back(std::move(e));
    }
    return store;
  }

  template <class T>
  void apply_to(Network<T>& net) const {
    auto ps = net.params();
    if (ps.size() != entries.size()) throw CorruptionError("parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (ps[i]->name != entries[i].name || ps[i]->value.shape != entries[i].shape) {
        throw CorruptionError("parameter layout mismatch at " + entries[i].name);
      }
      for (std::size_t j = 0; j < entries[i].values.size(); ++j) {
        ps[i]->value[j] = static_cast<T>(entries[i].values[j]);
      }
    }
  }

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out = {'C', 'D', 'C', 'P'};
    wire::put_u16(out, kParamStoreVersion);
    wire::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      wire::put_u16(out, static_cast<std::uint16_t>(e.name.size()));
      out.insert(out.end(), e.name.begin(), e.name.end());
      out.push_back(static_cast<std::uint8_t>(e.shape.size()));
      for (int ext : e.shape) wire::put_u32(out, static_cast<std::uint32_t>(ext));
      for (float v : e.values) wire::put_f32(out, v);
    }
    return out;
  }

  static ParamStore deserialize(const std::vector<std::uint8_t>& bytes) {
    wire::Reader r{bytes.data(), bytes.size()};
    if (r.str(4) != "CDCP") throw CorruptionError("bad ParamStore magic");
    if (r.u16() != kParamStoreVersion) throw CorruptionError("unsupported ParamStore version");
    std::uint32_t count = r.u32();
    ParamStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
      Entry e;
      e.name = r.str(r.u16());
      std::uint8_t rank = r.u8();
      std::size_t numel = 1;
      for (std::uint8_t d = 0; d < rank; ++d) {
        std::uint32_t ext = r.u32();
        if (ext == 0) throw CorruptionError("zero extent in ParamStore entry");
        e.shape.push_back(static_cast<int>(ext));
        numel *= ext;
      }
      e.values.reserve(numel);
      for (std::size_t j = 0; j < numel; ++j) e.values.push_back(r.f32());
      store.entries.push_back(std::move(e));
    }
    if (r.pos != bytes.size()) throw CorruptionError("trailing bytes after ParamStore");
    return store;
  }
};

template <class T>
std::vector<std::uint8_t> serialize_network(Network<T>& net) {
  return ParamStore::from_network(net).serialize();
}

template <class T>
void load_network(Network<T>& net, const std::vector<std::uint8_t>& bytes) {
  ParamStore::deserialize(bytes).apply_to(net);
}

}  // namespace cdc
