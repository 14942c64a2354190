#pragma once

#include <algorithm>
#include <array>
#include <cstdint>

#include "iolw/bytes.hpp"

// AES-128 block cipher plus CMAC. Self-contained so that the link layer can
// truncate authentication tags below what EVP-style APIs allow and so the
// error-propagation experiment can run the raw inverse cipher on single
// blocks. Tables are generated at compile time from the field arithmetic,
// not transcribed.

namespace iolw {
namespace aesdetail {

constexpr uint8_t xtime(uint8_t x) {
  return uint8_t((x << 1) ^ ((x >> 7) * 0x1b));
}

constexpr uint8_t gmul(uint8_t a, uint8_t b) {
  uint8_t r = 0;
  for (int i = 0; i < 8; ++i) {
    if (b & 1) r ^= a;
    a = xtime(a);
    b = uint8_t(b >> 1);
  }
  return r;
}

constexpr uint8_t rotl8(uint8_t x, int n) {
  return uint8_t(uint8_t(x << n) | (x >> (8 - n)));
}

constexpr std::array<uint8_t, 256> make_sbox() {
  std::array<uint8_t, 256> sb{};
  for (int i = 0; i < 256; ++i) {
    uint8_t inv = 0;
    if (i != 0) {
      // a^254 == a^-1 in GF(2^8)
      uint8_t result = 1, base = uint8_t(i);
      for (int e = 254; e != 0; e >>= 1) {
        if (e & 1) result = gmul(result, base);
        base = gmul(base, base);
      }
      inv = result;
    }
    sb[i] = uint8_t(inv ^ rotl8(inv, 1) ^ rotl8(inv, 2) ^ rotl8(inv, 3) ^
                    rotl8(inv, 4) ^ 0x63);
  }
  return sb;
}

constexpr std::array<uint8_t, 256> invert(const std::array<uint8_t, 256>& t) {
  std::array<uint8_t, 256> r{};
  for (int i = 0; i < 256; ++i) r[t[i]] = uint8_t(i);
  return r;
}

template <uint8_t C>
constexpr std::array<uint8_t, 256> make_mul() {
  std::array<uint8_t, 256> r{};
  for (int i = 0; i < 256; ++i) r[i] = gmul(uint8_t(i), C);
  return r;
}

inline constexpr auto sbox = make_sbox();
inline constexpr auto inv_sbox = invert(sbox);
inline constexpr auto mul2 = make_mul<2>();
inline constexpr auto mul3 = make_mul<3>();
inline constexpr auto mul9 = make_mul<9>();
inline constexpr auto mul11 = make_mul<11>();
inline constexpr auto mul13 = make_mul<13>();
inline constexpr auto mul14 = make_mul<14>();

} // namespace aesdetail

class Aes128 {
public:
  explicit Aes128(const uint8_t key[16]) { expand(key); }
  explicit Aes128(const Bytes& key) : Aes128(key.data()) {}

  void encrypt_block(const uint8_t in[16], uint8_t out[16]) const {
    using namespace aesdetail;
    uint8_t s[16];
    for (int i = 0; i < 16; ++i) s[i] = in[i] ^ rk_[i];
    for (int round = 1; round < 10; ++round) {
      uint8_t t[16];
      sub_shift(s, t);
      const uint8_t* k = rk_.data() + 16 * round;
      for (int c = 0; c < 4; ++c) {
        uint8_t a0 = t[4 * c], a1 = t[4 * c + 1], a2 = t[4 * c + 2],
                a3 = t[4 * c + 3];
        s[4 * c + 0] = uint8_t(mul2[a0] ^ mul3[a1] ^ a2 ^ a3 ^ k[4 * c + 0]);
        s[4 * c + 1] = uint8_t(a0 ^ mul2[a1] ^ mul3[a2] ^ a3 ^ k[4 * c + 1]);
        s[4 * c + 2] = uint8_t(a0 ^ a1 ^ mul2[a2] ^ mul3[a3] ^ k[4 * c + 2]);
        s[4 * c + 3] = uint8_t(mul3[a0] ^ a1 ^ a2 ^ mul2[a3] ^ k[4 * c + 3]);
      }
    }
    uint8_t t[16];
    sub_shift(s, t);
    const uint8_t* k = rk_.data() + 160;
    for (int i = 0; i < 16; ++i) out[i] = t[i] ^ k[i];
  }

  void decrypt_block(const uint8_t in[16], uint8_t out[16]) const {
    using namespace aesdetail;
    uint8_t s[16];
    const uint8_t* k = rk_.data() + 160;
    for (int i = 0; i < 16; ++i) s[i] = in[i] ^ k[i];
    for (int round = 9; round >= 1; --round) {
      uint8_t t[16];
      inv_shift_sub(s, t);
      k = rk_.data() + 16 * round;
      for (int i = 0; i < 16; ++i) t[i] ^= k[i];
      for (int c = 0; c < 4; ++c) {
        uint8_t a0 = t[4 * c], a1 = t[4 * c + 1], a2 = t[4 * c + 2],
                a3 = t[4 * c + 3];
        s[4 * c + 0] = uint8_t(mul14[a0] ^ mul11[a1] ^ mul13[a2] ^ mul9[a3]);
        s[4 * c + 1] = uint8_t(mul9[a0] ^ mul14[a1] ^ mul11[a2] ^ mul13[a3]);
        s[4 * c + 2] = uint8_t(mul13[a0] ^ mul9[a1] ^ mul14[a2] ^ mul11[a3]);
        s[4 * c + 3] = uint8_t(mul11[a0] ^ mul13[a1] ^ mul9[a2] ^ mul14[a3]);
      }
    }
    uint8_t t[16];
    inv_shift_sub(s, t);
    for (int i = 0; i < 16; ++i) out[i] = t[i] ^ rk_[i];
  }

  Bytes encrypt_block(const Bytes& in) const {
    Bytes out(16);
    encrypt_block(in.data(), out.data());
    return out;
  }

  Bytes decrypt_block(const Bytes& in) const {
    Bytes out(16);
    decrypt_block(in.data(), out.data());
    return out;
  }

private:
  // state is column-major: s[4*col + row]
  static void sub_shift(const uint8_t s[16], uint8_t t[16]) {
    using aesdetail::sbox;
    for (int c = 0; c < 4; ++c)
      for (int r = 0; r < 4; ++r)
        t[4 * c + r] = sbox[s[4 * ((c + r) & 3) + r]];
  }

  static void inv_shift_sub(const uint8_t s[16], uint8_t t[16]) {
    using aesdetail::inv_sbox;
    for (int c = 0; c < 4; ++c)
      for (int r = 0; r < 4; ++r)
        t[4 * ((c + r) & 3) + r] = inv_sbox[s[4 * c + r]];
  }

  void expand(const uint8_t key[16]) {
    using namespace aesdetail;
    std::copy(key, key + 16, rk_.begin());
    uint8_t rcon = 1;
    for (int i = 16; i < 176; i += 4) {
      uint8_t t[4] = {rk_[i - 4], rk_[i - 3], rk_[i - 2], rk_[i - 1]};
      if (i % 16 == 0) {
        uint8_t first = t[0];
        t[0] = uint8_t(sbox[t[1]] ^ rcon);
        t[1] = sbox[t[2]];
        t[2] = sbox[t[3]];
        t[3] = sbox[first];
        rcon = xtime(rcon);
      }
      for (int k = 0; k < 4; ++k) rk_[i + k] = rk_[i - 16 + k] ^ t[k];
    }
  }

  std::array<uint8_t, 176> rk_;
};

namespace aesdetail {

inline std::array<uint8_t, 16> cmac_dbl(const std::array<uint8_t, 16>& in) {
  std::array<uint8_t, 16> out{};
  uint8_t carry = 0;
  for (int i = 15; i >= 0; --i) {
    out[i] = uint8_t((in[i] << 1) | carry);
    carry = in[i] >> 7;
  }
  if (carry) out[15] ^= 0x87;
  return out;
}

} // namespace aesdetail

// RFC 4493 AES-CMAC.
inline void cmac(const Aes128& aes, const uint8_t* msg, size_t len,
                 uint8_t out[16]) {
  using namespace aesdetail;
  std::array<uint8_t, 16> zero{}, l{};
  aes.encrypt_block(zero.data(), l.data());
  auto k1 = cmac_dbl(l);
  auto k2 = cmac_dbl(k1);

  size_t nblocks = (len + 15) / 16;
  bool complete = len > 0 && len % 16 == 0;
  if (nblocks == 0) nblocks = 1;

  std::array<uint8_t, 16> x{};
  for (size_t b = 0; b + 1 < nblocks; ++b) {
    for (int i = 0; i < 16; ++i) x[i] ^= msg[16 * b + i];
    aes.encrypt_block(x.data(), x.data());
  }
  std::array<uint8_t, 16> last{};
  size_t off = 16 * (nblocks - 1);
  if (complete) {
    for (int i = 0; i < 16; ++i) last[i] = msg[off + i] ^ k1[i];
  } else {
    size_t rem = len - off;
    for (size_t i = 0; i < rem; ++i) last[i] = msg[off + i];
    last[rem] = 0x80;
    for (int i = 0; i < 16; ++i) last[i] ^= k2[i];
  }
  for (int i = 0; i < 16; ++i) x[i] ^= last[i];
  aes.encrypt_block(x.data(), out);
}

inline Bytes cmac(const Bytes& key, const Bytes& msg) {
  Aes128 aes(key);
  Bytes out(16);
  cmac(aes, msg.data(), msg.size(), out.data());
  return out;
}

// RFC 4615 AES-CMAC-PRF-128: accepts keys of any length.
inline Bytes cmac_prf128(const Bytes& key, const Bytes& msg) {
  Bytes k;
  if (key.size() == 16) {
    k = key;
  } else {
    Bytes zero(16, 0);
    k = cmac(zero, key);
  }
  return cmac(k, msg);
}

} // namespace iolw
