#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "iolw/ccm.hpp"
#include "iolw/errors.hpp"
#include "iolw/frame.hpp"

namespace iolw {

enum class LinkState : uint8_t { Active, FailState };
enum class LinkRole : uint8_t { Master, Device };

// Authenticated-encryption state for one device<->master association, held
// separately at each endpoint. Each direction runs its own counter space,
// separated by a direction bit in the nonce, so both ends share one key.
struct SecureLink {
  Bytes key;
  unsigned tau_bits = 32;
  LinkRole role = LinkRole::Master;
  uint32_t master_id = 0;
  uint64_t device_uid = 0;
  uint64_t tx_counter = 0;   // last counter used by this end
  uint64_t rx_highwater = 0; // highest counter accepted from the peer
  int consecutive_auth_failures = 0;
  LinkState state = LinkState::Active;

  Direction send_direction() const {
    return role == LinkRole::Master ? Direction::Downlink : Direction::Uplink;
  }
  Direction recv_direction() const {
    return role == LinkRole::Master ? Direction::Uplink : Direction::Downlink;
  }
};

inline constexpr int kLockoutThreshold = 3; // 1 initial + 2 retries
inline constexpr uint64_t kCounterMax = 0xFFFFFFFFull;

// Session key from the out-of-band shared secret and the link identity.
inline Bytes derive_link_key(const Bytes& shared_secret, uint32_t master_id,
                             uint64_t device_uid, unsigned tau_bits) {
  Bytes info;
  const char* label = "iolw link key v1";
  info.insert(info.end(), label, label + 16);
  info.resize(info.size() + 12);
  store_be32(info.data() + 16, master_id);
  store_be64(info.data() + 20, device_uid);
  info.push_back(uint8_t(tau_bits));
  return cmac_prf128(shared_secret, info);
}

inline SecureLink establish_link(const Bytes& shared_secret, uint32_t master_id,
                                 uint64_t device_uid, unsigned tau_bits,
                                 LinkRole role = LinkRole::Master) {
  if (shared_secret.size() < 16)
    throw WeakSecret(std::to_string(shared_secret.size()) + " bytes");
  SecurityMode::secured_tau(tau_bits); // validates the tag length
  SecureLink link;
  link.key = derive_link_key(shared_secret, master_id, device_uid, tau_bits);
  link.tau_bits = tau_bits;
  link.role = role;
  link.master_id = master_id;
  link.device_uid = device_uid;
  return link;
}

// Nonce: master_id(4) | device_uid low 4 bytes | flags(1, bit0 = direction,
// 1 = uplink) | counter(4), big-endian fields, 13 bytes total.
inline std::array<uint8_t, 13> link_nonce(uint32_t master_id,
                                          uint64_t device_uid, Direction dir,
                                          uint32_t counter) {
  std::array<uint8_t, 13> n;
  store_be32(n.data(), master_id);
  store_be32(n.data() + 4, uint32_t(device_uid));
  n[8] = dir == Direction::Uplink ? 1 : 0;
  store_be32(n.data() + 9, counter);
  return n;
}

inline std::array<uint8_t, 13> link_nonce(const SecureLink& link,
                                          Direction dir, uint32_t counter) {
  return link_nonce(link.master_id, link.device_uid, dir, counter);
}

struct SealResult {
  uint32_t counter = 0;
  Bytes ciphertext;
  Bytes tag;
};

inline SealResult seal(SecureLink& link, const Bytes& header_bytes,
                       const Bytes& payload) {
  if (link.state != LinkState::Active) throw LinkInFailState();
  if (payload.size() > secured_payload_capacity(link.tau_bits))
    throw MalformedFrame("payload exceeds secured capacity");
  if (link.tx_counter >= kCounterMax) throw CounterExhausted();
  uint32_t counter = uint32_t(++link.tx_counter);

  Aes128 aes(link.key);
  auto nonce = link_nonce(link, link.send_direction(), counter);
  Bytes out = ccm_seal_trunc(aes, nonce.data(), nonce.size(), header_bytes,
                             payload, link.tau_bits / 8);
  SealResult r;
  r.counter = counter;
  size_t tag_len = link.tau_bits / 8;
  r.ciphertext.assign(out.begin(), out.end() - tag_len);
  r.tag.assign(out.end() - tag_len, out.end());
  return r;
}

enum class OpenStatus : uint8_t {
  Accepted,
  AuthFailure,
  ReplayRejected,
  LinkInFailState,
};

inline const char* to_string(OpenStatus s) {
  switch (s) {
    case OpenStatus::Accepted: return "Accepted";
    case OpenStatus::AuthFailure: return "AuthFailure";
    case OpenStatus::ReplayRejected: return "ReplayRejected";
    case OpenStatus::LinkInFailState: return "LinkInFailState";
  }
  return "?";
}

struct OpenResult {
  OpenStatus status = OpenStatus::AuthFailure;
  Bytes payload;
};

// Verify and decrypt one received frame. Tag mismatches count toward the
// lockout; the third consecutive one trips the link into FailState. Replays
// carry a valid tag and are rejected without touching the failure counter.
// The aes argument must be keyed with link.key; callers that open many
// frames keep one expanded cipher instead of re-expanding per frame.
inline OpenResult open_with(SecureLink& link, const Aes128& aes,
                            uint32_t counter, const Bytes& header_bytes,
                            const Bytes& ciphertext, const Bytes& tag) {
  if (link.state != LinkState::Active)
    return {OpenStatus::LinkInFailState, {}};

  auto nonce = link_nonce(link, link.recv_direction(), counter);
  Bytes ct_tag = ciphertext;
  ct_tag.insert(ct_tag.end(), tag.begin(), tag.end());
  auto pt = ccm_open_trunc(aes, nonce.data(), nonce.size(), header_bytes,
                           ct_tag, link.tau_bits / 8);
  if (!pt) {
    if (++link.consecutive_auth_failures >= kLockoutThreshold)
      link.state = LinkState::FailState;
    return {OpenStatus::AuthFailure, {}};
  }
  if (counter <= link.rx_highwater) return {OpenStatus::ReplayRejected, {}};
  link.rx_highwater = counter;
  link.consecutive_auth_failures = 0;
  return {OpenStatus::Accepted, std::move(*pt)};
}

inline OpenResult open(SecureLink& link, uint32_t counter,
                       const Bytes& header_bytes, const Bytes& ciphertext,
                       const Bytes& tag) {
  Aes128 aes(link.key);
  return open_with(link, aes, counter, header_bytes, ciphertext, tag);
}

inline SecureLink reconfigure(const SecureLink& link,
                              const Bytes& new_shared_secret) {
  if (link.state != LinkState::FailState) throw NotInFailState();
  return establish_link(new_shared_secret, link.master_id, link.device_uid,
                        link.tau_bits, link.role);
}

} // namespace iolw
