#pragma once

#include <cstdint>
#include <optional>

#include "iolw/aes.hpp"
#include "iolw/bytes.hpp"
#include "iolw/errors.hpp"

// AES-CCM (RFC 3610). Two usage modes:
//  - ccm_seal/ccm_open with a standard tag length (4..16 even) for
//    interoperable framing and the published test vectors;
//  - ccm_seal_trunc/ccm_open_trunc, which always authenticate with the full
//    16-byte tag and then cut it down to an arbitrary byte count. The short
//    over-the-air tags of the radio link are produced this way, so a 1-byte
//    tag still commits to the full MAC computation underneath.

namespace iolw {
namespace ccmdetail {

inline void check_nonce(size_t nlen) {
  if (nlen < 7 || nlen > 13) throw InvalidParams("ccm nonce must be 7..13 bytes");
}

// Copying all 13 nonce bytes forms a one-past-end source pointer, which some
// gcc releases misreport under -Warray-bounds when they fuse the loop into
// memcpy. nlen is range-checked above.
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Warray-bounds"
inline void copy_nonce(uint8_t* dst, const uint8_t* nonce, size_t nlen) {
  for (size_t i = 0; i < nlen; ++i) dst[i] = nonce[i];
}
#pragma GCC diagnostic pop

inline size_t lfield(size_t nlen) { return 15 - nlen; }

// CBC-MAC over B0 | encoded aad | message, per RFC 3610, full 16-byte result.
inline void auth_field(const Aes128& aes, const uint8_t* nonce, size_t nlen,
                       const Bytes& aad, const Bytes& msg, size_t tag_len,
                       uint8_t out[16]) {
  check_nonce(nlen);
  const size_t L = lfield(nlen);
  if (msg.size() >> (8 * L) != 0) throw InvalidParams("ccm message too long for nonce length");
  if (aad.size() >= 0xFF00) throw InvalidParams("ccm aad too long");

  uint8_t b[16];
  b[0] = uint8_t((aad.empty() ? 0 : 0x40) | (((tag_len - 2) / 2) << 3) | (L - 1));
  copy_nonce(b + 1, nonce, nlen);
  size_t len = msg.size();
  for (size_t i = 0; i < L; ++i) b[15 - i] = uint8_t(len >> (8 * i));

  uint8_t x[16];
  aes.encrypt_block(b, x);

  if (!aad.empty()) {
    uint8_t blk[16] = {};
    blk[0] = uint8_t(aad.size() >> 8);
    blk[1] = uint8_t(aad.size());
    size_t fill = 2;
    for (size_t i = 0; i < aad.size(); ++i) {
      blk[fill++] = aad[i];
      if (fill == 16) {
        for (int k = 0; k < 16; ++k) x[k] ^= blk[k];
        aes.encrypt_block(x, x);
        fill = 0;
        std::fill(blk, blk + 16, uint8_t(0));
      }
    }
    if (fill) {
      for (int k = 0; k < 16; ++k) x[k] ^= blk[k];
      aes.encrypt_block(x, x);
    }
  }

  for (size_t off = 0; off < msg.size(); off += 16) {
    size_t n = std::min<size_t>(16, msg.size() - off);
    for (size_t k = 0; k < n; ++k) x[k] ^= msg[off + k];
    aes.encrypt_block(x, x);
  }
  std::copy(x, x + 16, out);
}

inline void ctr_block(const uint8_t* nonce, size_t nlen, uint64_t counter,
                      uint8_t out[16]) {
  check_nonce(nlen);
  const size_t L = lfield(nlen);
  out[0] = uint8_t(L - 1);
  copy_nonce(out + 1, nonce, nlen);
  for (size_t i = 0; i < L; ++i) out[15 - i] = uint8_t(counter >> (8 * i));
}

} // namespace ccmdetail

// XOR data with the CCM keystream (blocks A_1, A_2, ...). Applying it twice
// is the identity, so this both encrypts and decrypts.
inline void ccm_ctr_xor(const Aes128& aes, const uint8_t* nonce, size_t nlen,
                        uint8_t* data, size_t len) {
  ccmdetail::check_nonce(nlen);
  uint8_t a[16], s[16];
  for (size_t off = 0; off < len; off += 16) {
    ccmdetail::ctr_block(nonce, nlen, off / 16 + 1, a);
    aes.encrypt_block(a, s);
    size_t n = std::min<size_t>(16, len - off);
    for (size_t k = 0; k < n; ++k) data[off + k] ^= s[k];
  }
}

namespace ccmdetail {

// Shared core: encrypts pt and returns ct | full_tag_prefix(tag_out_len),
// authenticating with tag_auth_len in the B0 flags.
inline Bytes seal_core(const Aes128& aes, const uint8_t* nonce, size_t nlen,
                       const Bytes& aad, const Bytes& pt, size_t tag_auth_len,
                       size_t tag_out_len) {
  check_nonce(nlen);
  uint8_t t[16], a0[16], s0[16];
  auth_field(aes, nonce, nlen, aad, pt, tag_auth_len, t);
  ctr_block(nonce, nlen, 0, a0);
  aes.encrypt_block(a0, s0);

  Bytes out(pt);
  ccm_ctr_xor(aes, nonce, nlen, out.data(), out.size());
  for (size_t i = 0; i < tag_out_len; ++i) out.push_back(t[i] ^ s0[i]);
  return out;
}

inline std::optional<Bytes> open_core(const Aes128& aes, const uint8_t* nonce,
                                      size_t nlen, const Bytes& aad,
                                      const Bytes& ct_tag, size_t tag_auth_len,
                                      size_t tag_out_len) {
  check_nonce(nlen);
  if (ct_tag.size() < tag_out_len) return std::nullopt;
  size_t clen = ct_tag.size() - tag_out_len;

  Bytes pt(ct_tag.begin(), ct_tag.begin() + clen);
  ccm_ctr_xor(aes, nonce, nlen, pt.data(), pt.size());

  uint8_t t[16], a0[16], s0[16];
  auth_field(aes, nonce, nlen, aad, pt, tag_auth_len, t);
  ctr_block(nonce, nlen, 0, a0);
  aes.encrypt_block(a0, s0);
  for (size_t i = 0; i < tag_out_len; ++i) t[i] ^= s0[i];

  if (!ct_equal(t, ct_tag.data() + clen, tag_out_len)) return std::nullopt;
  return pt;
}

} // namespace ccmdetail

// Standard CCM with an RFC-legal tag length (4, 6, 8, 10, 12, 14 or 16).
inline Bytes ccm_seal(const Aes128& aes, const uint8_t* nonce, size_t nlen,
                      const Bytes& aad, const Bytes& pt, size_t tag_len) {
  if (tag_len < 4 || tag_len > 16 || tag_len % 2 != 0)
    throw InvalidParams("ccm tag length must be even, 4..16");
  return ccmdetail::seal_core(aes, nonce, nlen, aad, pt, tag_len, tag_len);
}

inline std::optional<Bytes> ccm_open(const Aes128& aes, const uint8_t* nonce,
                                     size_t nlen, const Bytes& aad,
                                     const Bytes& ct_tag, size_t tag_len) {
  if (tag_len < 4 || tag_len > 16 || tag_len % 2 != 0)
    throw InvalidParams("ccm tag length must be even, 4..16");
  return ccmdetail::open_core(aes, nonce, nlen, aad, ct_tag, tag_len, tag_len);
}

// Full-tag CCM truncated on output: authenticates as tag length 16 and emits
// the first tag_len bytes (1..16, any value).
inline Bytes ccm_seal_trunc(const Aes128& aes, const uint8_t* nonce,
                            size_t nlen, const Bytes& aad, const Bytes& pt,
                            size_t tag_len) {
  if (tag_len < 1 || tag_len > 16)
    throw InvalidParams("truncated tag length must be 1..16 bytes");
  return ccmdetail::seal_core(aes, nonce, nlen, aad, pt, 16, tag_len);
}

inline std::optional<Bytes> ccm_open_trunc(const Aes128& aes,
                                           const uint8_t* nonce, size_t nlen,
                                           const Bytes& aad, const Bytes& ct_tag,
                                           size_t tag_len) {
  if (tag_len < 1 || tag_len > 16)
    throw InvalidParams("truncated tag length must be 1..16 bytes");
  return ccmdetail::open_core(aes, nonce, nlen, aad, ct_tag, 16, tag_len);
}

} // namespace iolw
