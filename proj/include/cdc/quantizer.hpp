#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cdc/errors.hpp"
#include "cdc/rng.hpp"
#include "cdc/tensor.hpp"

namespace cdc {

// Adjustable stochastic quantizer. Mask number m in {0..4} sets the scale
// s = 2^(4-m) and the symbol alphabet [-s+1, s] of size 2s = 2^(5-m).
struct QuantizerConfig {
  int m = 4;

  explicit QuantizerConfig(int mask = 4) : m(mask) {
    if (m < 0 || m > 4) throw ConfigError("mask number must be in {0..4}");
  }

  int scale() const { return 1 << (4 - m); }
  int bits_per_symbol() const { return 5 - m; }
  int q_min() const { return -scale() + 1; }
  int q_max() const { return scale(); }
};

// Quantized symbols with shape metadata; the per-sample unit of upload.
struct LatentCode {
  std::vector<std::int16_t> symbols;
  std::vector<int> shape;
  int m = 4;
};

// q = ceil(x*s + eps), clamped to the alphabet [-s+1, s]. One fresh eps per
// element; pass nullptr for the deterministic eps = 0 path (upload/eval).
template <class T>
LatentCode quantize(const Tensor<T>& x, const QuantizerConfig& cfg, NoiseSource* noise) {
  const int s = cfg.scale();
  LatentCode code;
  code.shape = x.shape;
  code.m = cfg.m;
  code.symbols.reserve(x.numel());
  for (const auto& v : x.data) {
    double xv = static_cast<double>(v);
    if (!(xv > -1.0 && xv < 1.0)) {
      throw DomainError("quantizer input outside (-1, 1): " + std::to_string(xv));
    }
    double eps = noise ? noise->next() : 0.0;
    int q = static_cast<int>(std::ceil(xv * s + eps));
    q = std::max(cfg.q_min(), std::min(cfg.q_max(), q));
    code.symbols.push_back(static_cast<std::int16_t>(q));
  }
  return code;
}

// Q'(q) = (q - 0.5) / s; outputs are strictly inside (-1, 1).
template <class T>
Tensor<T> dequantize(const LatentCode& code, const QuantizerConfig& cfg) {
  const double s = cfg.scale();
  Tensor<T> out;
  out.shape = code.shape;
  out.data.reserve(code.symbols.size());
  for (std::int16_t q : code.symbols) {
    if (q < cfg.q_min() || q > cfg.q_max()) {
      throw CorruptionError("latent symbol outside alphabet: " + std::to_string(q));
    }
    out.data.push_back(static_cast<T>((q - 0.5) / s));
  }
  return out;
}

// Forward value of the straight-through quantizer: dequantize(quantize(x)).
// The gradient contract is an exact identity Jacobian — callers propagate
// upstream gradients through unchanged. E_eps[Q'(Q(x))] = x away from clamp
// saturation (|x*s| <= s - 0.5), which justifies the pass-through.
template <class T>
Tensor<T> quantize_st(const Tensor<T>& x, const QuantizerConfig& cfg, NoiseSource& noise) {
  return dequantize<T>(quantize(x, cfg, &noise), cfg);
}

// Packed payload bit count: count * (5 - m).
std::uint64_t payload_bits(std::uint64_t count, int m);

// Packed payload byte count: ceil(count * (5 - m) / 8).
std::uint64_t payload_bytes(std::uint64_t count, int m);

// Maps each symbol to u = q + s - 1 in [0, 2s-1] and writes bits_per_symbol
// bits per symbol MSB-first, zero-padded to a byte boundary. Payload bits
// only; the wire header lives in encode_latent_wire.
std::vector<std::uint8_t> pack(const LatentCode& code);

// Exact inverse of pack. Byte length must equal payload_bytes(count, m) and
// padding bits must be zero.
LatentCode unpack(const std::vector<std::uint8_t>& bytes, int m, const std::vector<int>& shape);

// Latent wire format: magic "CDCQ", version u16 LE, m u8, rank u8,
// extents u32 LE each, payload byte count u32 LE, packed bits.
inline constexpr std::uint16_t kLatentWireVersion = 1;

std::vector<std::uint8_t> encode_latent_wire(const LatentCode& code);
LatentCode decode_latent_wire(const std::vector<std::uint8_t>& bytes);

}  // namespace cdc
