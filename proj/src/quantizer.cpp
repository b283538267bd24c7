#include "cdc/quantizer.hpp"

#include "cdc/param_store.hpp"

namespace cdc {

std::uint64_t payload_bits(std::uint64_t count, int m) {
  QuantizerConfig cfg(m);
  return count * static_cast<std::uint64_t>(cfg.bits_per_symbol());
}

std::uint64_t payload_bytes(std::uint64_t count, int m) {
  return (payload_bits(count, m) + 7) / 8;
}

std::vector<std::uint8_t> pack(const LatentCode& code) {
  QuantizerConfig cfg(code.m);
  const int bps = cfg.bits_per_symbol();
  std::vector<std::uint8_t> out(payload_bytes(code.symbols.size(), code.m), 0);
  std::size_t bitpos = 0;
  for (std::int16_t q : code.symbols) {
    if (q < cfg.q_min() || q > cfg.q_max()) {
      throw CorruptionError("symbol outside alphabet during pack");
    }
    std::uint32_t u = static_cast<std::uint32_t>(q - cfg.q_min());
    for (int b = bps - 1; b >= 0; --b, ++bitpos) {
      if ((u >> b) & 1u) out[bitpos / 8] |= static_cast<std::uint8_t>(0x80u >> (bitpos % 8));
    }
  }
  return out;
}

LatentCode unpack(const std::vector<std::uint8_t>& bytes, int m, const std::vector<int>& shape) {
  QuantizerConfig cfg(m);
  const int bps = cfg.bits_per_symbol();
  // Rank-0 shape denotes an empty code.
  std::size_t count = shape.empty() ? 0 : Tensor<float>::numel_of(shape);
  if (bytes.size() != payload_bytes(count, m)) {
    throw CorruptionError("packed payload length mismatch: got " + std::to_string(bytes.size()) +
                          ", expected " + std::to_string(payload_bytes(count, m)));
  }
  LatentCode code;
  code.m = m;
  code.shape = shape;
  code.symbols.reserve(count);
  std::size_t bitpos = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < bps; ++b, ++bitpos) {
      u = (u << 1) | ((bytes[bitpos / 8] >> (7 - bitpos % 8)) & 1u);
    }
    int q = static_cast<int>(u) + cfg.q_min();
    if (q < cfg.q_min() || q > cfg.q_max()) {
      throw CorruptionError("decoded symbol outside alphabet");
    }
    code.symbols.push_back(static_cast<std::int16_t>(q));
  }
  // Padding bits must be zero.
  for (; bitpos < bytes.size() * 8; ++bitpos) {
    if ((bytes[bitpos / 8] >> (7 - bitpos % 8)) & 1u) {
      throw CorruptionError("nonzero padding bits in packed payload");
    }
  }
  return code;
}

std::vector<std::uint8_t> encode_latent_wire(const LatentCode& code) {
  std::vector<std::uint8_t> out = {'C', 'D', 'C', 'Q'};
  wire::put_u16(out, kLatentWireVersion);
  out.push_back(static_cast<std::uint8_t>(code.m));
  out.push_back(static_cast<std::uint8_t>(code.shape.size()));
  for (int ext : code.shape) wire::put_u32(out, static_cast<std::uint32_t>(ext));
  std::vector<std::uint8_t> packed = pack(code);
  wire::put_u32(out, static_cast<std::uint32_t>(packed.size()));
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

LatentCode decode_latent_wire(const std::vector<std::uint8_t>& bytes) {
  wire::Reader r{bytes.data(), bytes.size()};
  if (r.str(4) != "CDCQ") throw CorruptionError("bad latent wire magic");
  if (r.u16() != kLatentWireVersion) throw CorruptionError("unsupported latent wire version");
  int m = r.u8();
  if (m < 0 || m > 4) throw CorruptionError("invalid mask number in latent wire");
  std::uint8_t rank = r.u8();
  std::vector<int> shape;
  for (std::uint8_t i = 0; i < rank; ++i) {
    std::uint32_t ext = r.u32();
    if (ext == 0) throw CorruptionError("zero extent in latent wire");
    shape.push_back(static_cast<int>(ext));
  }
  std::uint32_t nbytes = r.u32();
  std::vector<std::uint8_t> packed;
  packed.reserve(nbytes);
  for (std::uint32_t i = 0; i < nbytes; ++i) packed.push_back(r.u8());
  if (r.pos != bytes.size()) throw CorruptionError("trailing bytes after latent wire payload");
  return unpack(packed, m, shape);
}

}  // namespace cdc
