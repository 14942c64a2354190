#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "iolw/bytes.hpp"
#include "iolw/errors.hpp"
#include "iolw/rng.hpp"

namespace iolw {

// CRC-8, polynomial x^8+x^2+x+1 (0x07), init 0. Trailer on legacy bursts so
// corrupted frames are detected rather than silently accepted.
inline uint8_t crc8(const uint8_t* data, size_t len) {
  uint8_t crc = 0;
  for (size_t i = 0; i < len; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b)
      crc = (crc & 0x80) ? uint8_t((crc << 1) ^ 0x07) : uint8_t(crc << 1);
  }
  return crc;
}

inline uint8_t crc8(const Bytes& data) { return crc8(data.data(), data.size()); }

inline Bytes append_fcs(Bytes wire) {
  wire.push_back(crc8(wire));
  return wire;
}

// Returns the body if the trailer matches, nullopt otherwise.
inline std::optional<Bytes> strip_fcs(const Bytes& wire) {
  if (wire.size() < 2) return std::nullopt;
  if (crc8(wire.data(), wire.size() - 1) != wire.back()) return std::nullopt;
  return Bytes(wire.begin(), wire.end() - 1);
}

enum class NoiseScope : uint8_t { Uplink, Downlink, Both };

inline const char* to_string(NoiseScope s) {
  switch (s) {
    case NoiseScope::Uplink: return "uplink";
    case NoiseScope::Downlink: return "downlink";
    case NoiseScope::Both: return "both";
  }
  return "?";
}

inline NoiseScope noise_scope_from(const std::string& s) {
  if (s == "uplink") return NoiseScope::Uplink;
  if (s == "downlink") return NoiseScope::Downlink;
  if (s == "both") return NoiseScope::Both;
  throw InvalidParams("noise scope must be uplink, downlink, or both: " + s);
}

struct JamPlan {
  uint64_t start_cycle = 0;
  uint64_t stop_cycle = 0; // exclusive
  bool all_channels = true;
  std::set<int> channels;

  bool active(uint64_t cycle) const {
    return cycle >= start_cycle && cycle < stop_cycle;
  }
  bool covers(uint64_t cycle, int channel) const {
    if (!active(cycle)) return false;
    return all_channels || channels.count(channel) != 0;
  }
};

struct MediumParams {
  double bit_error_rate = 0.0; // per-bit flip probability
  NoiseScope noise_scope = NoiseScope::Both;
  std::optional<JamPlan> jam;

  void validate() const {
    if (bit_error_rate < 0.0 || bit_error_rate >= 1.0)
      throw InvalidParams("bit error rate must be in [0, 1)");
    if (jam && jam->stop_cycle < jam->start_cycle)
      throw InvalidParams("jam window ends before it starts");
    if (jam && !jam->all_channels && jam->channels.empty())
      throw InvalidParams("channel-selective jam plan lists no channels");
  }

  // Per-burst flip probability q maps to the bit rate via
  // q = 1 - (1-p)^bits, so p = 1 - (1-q)^(1/bits).
  static double rate_for_burst_failure(double q, int bits) {
    if (q < 0.0 || q >= 1.0 || bits <= 0)
      throw InvalidParams("burst failure probability must be in [0,1) over >0 bits");
    if (q == 0.0) return 0.0;
    return 1.0 - std::pow(1.0 - q, 1.0 / double(bits));
  }
};

// Flips each bit independently with probability p; returns the flip count.
// Skips between flips geometrically so clean bursts cost one draw.
inline uint32_t apply_bit_noise(RngStream& rng, Bytes& wire, double p) {
  if (p <= 0.0 || wire.empty()) return 0;
  uint32_t flips = 0;
  const uint64_t nbits = wire.size() * 8;
  uint64_t pos = rng.geometric_skip(p);
  while (pos < nbits) {
    wire[pos >> 3] ^= uint8_t(1u << (pos & 7));
    ++flips;
    pos += 1 + rng.geometric_skip(p);
  }
  return flips;
}

} // namespace iolw
