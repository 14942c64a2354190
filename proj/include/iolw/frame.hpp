#pragma once

#include <cstdint>
#include <string>

#include "iolw/bytes.hpp"
#include "iolw/errors.hpp"

namespace iolw {

enum class SlotKind : uint8_t { SSlot, DSlot };
enum class Direction : uint8_t { Downlink, Uplink };

inline const char* to_string(SlotKind k) {
  return k == SlotKind::SSlot ? "SSlot" : "DSlot";
}
inline const char* to_string(Direction d) {
  return d == Direction::Downlink ? "downlink" : "uplink";
}

// Legacy (plaintext) or secured with a tag of tau bits. tau_bits == 0 means
// legacy. 8-bit tags exist for desk-scale forgery experiments; production
// analysis uses 16..64.
struct SecurityMode {
  unsigned tau_bits = 0;

  bool secured() const { return tau_bits != 0; }
  unsigned tag_bytes() const { return tau_bits / 8; }

  static SecurityMode legacy() { return {}; }
  static SecurityMode secured_tau(unsigned tau) {
    if (tau != 8 && tau != 16 && tau != 24 && tau != 32 && tau != 64)
      throw ConfigInvalid("unsupported tag length " + std::to_string(tau));
    return {tau};
  }

  bool operator==(const SecurityMode&) const = default;
};

// Wire limits. Legacy frames are control octet plus payload; secured DSlot
// frames spend 4 octets on the counter and tau/8 on the tag out of the
// 14-octet net budget.
inline constexpr size_t kLegacySSlotPayloadMax = 1;
inline constexpr size_t kLegacyDSlotPayloadMax = 14;
inline constexpr size_t kSecuredNetBudget = 14;
inline constexpr size_t kCounterBytes = 4;

inline size_t secured_payload_capacity(unsigned tau_bits) {
  return kSecuredNetBudget - kCounterBytes - tau_bits / 8;
}

struct ControlBits {
  Direction direction = Direction::Downlink;
  uint8_t retry = 0; // 0 initial, 1..2 repetitions
  bool service = false;
  bool pairing = false;

  bool operator==(const ControlBits&) const = default;
};

inline uint8_t encode_control(const ControlBits& c) {
  if (c.retry > 2) throw MalformedFrame("retry count > 2");
  return uint8_t((c.direction == Direction::Uplink ? 1 : 0) | (c.retry << 1) |
                 (c.service ? 0x08 : 0) | (c.pairing ? 0x10 : 0));
}

inline ControlBits decode_control(uint8_t octet) {
  if (octet & 0xE0) throw MalformedFrame("reserved control bits set");
  ControlBits c;
  c.direction = (octet & 0x01) ? Direction::Uplink : Direction::Downlink;
  c.retry = uint8_t((octet >> 1) & 0x03);
  if (c.retry > 2) throw MalformedFrame("retry count > 2");
  c.service = (octet & 0x08) != 0;
  c.pairing = (octet & 0x10) != 0;
  return c;
}

// Wire view of one slot transmission. For secured frames payload holds the
// ciphertext and tag the truncated authentication tag; sealing plaintext into
// this shape is the secure link's job.
struct Frame {
  SlotKind kind = SlotKind::SSlot;
  SecurityMode mode;
  ControlBits control;
  uint32_t counter = 0; // secured only
  Bytes payload;
  Bytes tag; // secured only, tau/8 bytes

  bool operator==(const Frame&) const = default;
};

inline Bytes encode_frame(const Frame& f) {
  if (!f.mode.secured()) {
    size_t cap = f.kind == SlotKind::SSlot ? kLegacySSlotPayloadMax
                                           : kLegacyDSlotPayloadMax;
    if (f.payload.size() > cap) throw MalformedFrame("legacy payload too long");
    if (!f.tag.empty()) throw MalformedFrame("legacy frame with tag");
    Bytes out;
    out.push_back(encode_control(f.control));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
  }
  if (f.kind == SlotKind::SSlot)
    throw MalformedFrame("secured SSlot not representable");
  if (f.tag.size() != f.mode.tag_bytes())
    throw MalformedFrame("tag length does not match mode");
  if (f.payload.size() > secured_payload_capacity(f.mode.tau_bits))
    throw MalformedFrame("secured payload exceeds net capacity");
  Bytes out;
  out.push_back(encode_control(f.control));
  out.resize(1 + kCounterBytes);
  store_be32(out.data() + 1, f.counter);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  out.insert(out.end(), f.tag.begin(), f.tag.end());
  return out;
}

inline Frame decode_frame(SlotKind kind, SecurityMode mode, const Bytes& wire) {
  if (wire.empty()) throw MalformedFrame("empty frame");
  Frame f;
  f.kind = kind;
  f.mode = mode;
  f.control = decode_control(wire[0]);
  if (!mode.secured()) {
    size_t cap = kind == SlotKind::SSlot ? kLegacySSlotPayloadMax
                                         : kLegacyDSlotPayloadMax;
    if (wire.size() - 1 > cap) throw MalformedFrame("legacy payload too long");
    f.payload.assign(wire.begin() + 1, wire.end());
    return f;
  }
  if (kind == SlotKind::SSlot)
    throw MalformedFrame("secured SSlot not representable");
  size_t tag_len = mode.tag_bytes();
  if (wire.size() < 1 + kCounterBytes + tag_len)
    throw MalformedFrame("secured frame too short");
  size_t ct_len = wire.size() - 1 - kCounterBytes - tag_len;
  if (ct_len > secured_payload_capacity(mode.tau_bits))
    throw MalformedFrame("secured payload exceeds net capacity");
  f.counter = load_be32(wire.data() + 1);
  f.payload.assign(wire.begin() + 1 + kCounterBytes,
                   wire.begin() + 1 + kCounterBytes + ct_len);
  f.tag.assign(wire.end() - tag_len, wire.end());
  return f;
}

} // namespace iolw
