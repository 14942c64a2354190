#include <catch2/catch_amalgamated.hpp>

#include "iolw/aes.hpp"
#include "iolw/ccm.hpp"
#include "iolw/rng.hpp"

using namespace iolw;

TEST_CASE("aes128 encrypts the fips-197 example block") {
  Bytes key = from_hex("000102030405060708090a0b0c0d0e0f");
  Bytes pt = from_hex("00112233445566778899aabbccddeeff");
  Aes128 aes(key);
  CHECK(to_hex(aes.encrypt_block(pt)) == "69c4e0d86a7b0430d8cdb78070b4c55a");
  CHECK(aes.decrypt_block(aes.encrypt_block(pt)) == pt);
}

TEST_CASE("aes128 decrypt inverts encrypt on arbitrary blocks") {
  auto rng = derive_stream(7, "aes.roundtrip");
  Aes128 aes(rng.bytes(16));
  for (int i = 0; i < 64; ++i) {
    Bytes pt = rng.bytes(16);
    CHECK(aes.decrypt_block(aes.encrypt_block(pt)) == pt);
  }
}

TEST_CASE("cmac matches rfc 4493 examples") {
  Bytes key = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
  Bytes m64 = from_hex(
      "6bc1bee22e409f96e93d7e117393172a"
      "ae2d8a571e03ac9c9eb76fac45af8e51"
      "30c81c46a35ce411e5fbc1191a0a52ef"
      "f69f2445df4f9b17ad2b417be66c3710");

  CHECK(to_hex(cmac(key, {})) == "bb1d6929e95937287fa37d129b756746");
  CHECK(to_hex(cmac(key, Bytes(m64.begin(), m64.begin() + 16))) ==
        "070a16b46b4d4144f79bdd9dd04a287c");
  CHECK(to_hex(cmac(key, Bytes(m64.begin(), m64.begin() + 40))) ==
        "dfa66747de9ae63030ca32611497c827");
  CHECK(to_hex(cmac(key, m64)) == "51f0bebf7e3b9d92fc49741779363cfe");
}

TEST_CASE("cmac_prf128 matches rfc 4615 examples") {
  Bytes msg = from_hex("000102030405060708090a0b0c0d0e0f10111213");
  CHECK(to_hex(cmac_prf128(from_hex("000102030405060708090a0b0c0d0e0fedcb"),
                           msg)) == "84a348a4a45d235babfffc0d2b4da09a");
  CHECK(to_hex(cmac_prf128(from_hex("000102030405060708090a0b0c0d0e0f"),
                           msg)) == "980ae87b5f4c9c5214f5b6a8455e4c2d");
  CHECK(to_hex(cmac_prf128(from_hex("00010203040506070809"), msg)) ==
        "290d9e112edb09ee141fcf64c0b72f3d");
}

namespace {

void check_rfc3610(const char* nonce_hex, size_t aad_len, size_t pkt_len,
                   size_t tag_len, const char* expect_hex) {
  Aes128 aes(from_hex("c0c1c2c3c4c5c6c7c8c9cacbcccdcecf"));
  Bytes nonce = from_hex(nonce_hex);
  Bytes pkt(pkt_len);
  for (size_t i = 0; i < pkt_len; ++i) pkt[i] = uint8_t(i);
  Bytes aad(pkt.begin(), pkt.begin() + aad_len);
  Bytes pt(pkt.begin() + aad_len, pkt.end());

  Bytes sealed = ccm_seal(aes, nonce.data(), nonce.size(), aad, pt, tag_len);
  CHECK(to_hex(sealed) == expect_hex);
  auto opened = ccm_open(aes, nonce.data(), nonce.size(), aad, sealed, tag_len);
  REQUIRE(opened.has_value());
  CHECK(*opened == pt);
}

} // namespace

TEST_CASE("ccm matches rfc 3610 packet vectors") {
  check_rfc3610("00000003020100a0a1a2a3a4a5", 8, 31, 8,
                "588c979a61c663d2f066d0c2c0f989806d5f6b61dac38417e8d12cfdf926e0");
  check_rfc3610("00000004030201a0a1a2a3a4a5", 8, 32, 8,
                "72c91a36e135f8cf291ca894085c87e3cc15c439c9e43a3ba091d56e10400916");
  check_rfc3610("00000005040302a0a1a2a3a4a5", 8, 33, 8,
                "51b1e5f44a197d1da46b0f8e2d282ae871e838bb64da8596574adaa76fbd9fb0c5");
  check_rfc3610("00000009080706a0a1a2a3a4a5", 8, 31, 10,
                "0135d1b2c95f41d5d1d4fec185d166b8094e999dfed96c048c56602c97acbb7490");
}

TEST_CASE("truncated sealing cuts down the full 16-byte tag") {
  Aes128 aes(from_hex("c0c1c2c3c4c5c6c7c8c9cacbcccdcecf"));
  Bytes nonce = from_hex("00000003020100a0a1a2a3a4a5");
  Bytes pkt(31);
  for (size_t i = 0; i < pkt.size(); ++i) pkt[i] = uint8_t(i);
  Bytes aad(pkt.begin(), pkt.begin() + 8);
  Bytes pt(pkt.begin() + 8, pkt.end());

  const std::string full16 =
      "588c979a61c663d2f066d0c2c0f98980"
      "6d5f6b61dac384509da654e32deac369c2dae7133cb08d";
  Bytes sealed16 = ccm_seal_trunc(aes, nonce.data(), nonce.size(), aad, pt, 16);
  CHECK(to_hex(sealed16) == full16);
  CHECK(ccm_seal(aes, nonce.data(), nonce.size(), aad, pt, 16) == sealed16);

  for (size_t tl : {1u, 2u, 3u, 4u, 8u}) {
    Bytes sealed = ccm_seal_trunc(aes, nonce.data(), nonce.size(), aad, pt, tl);
    CHECK(sealed == Bytes(sealed16.begin(), sealed16.begin() + 23 + tl));
    auto opened =
        ccm_open_trunc(aes, nonce.data(), nonce.size(), aad, sealed, tl);
    REQUIRE(opened.has_value());
    CHECK(*opened == pt);
  }
}

TEST_CASE("ccm rejects tampered ciphertext, tag and aad") {
  Aes128 aes(from_hex("c0c1c2c3c4c5c6c7c8c9cacbcccdcecf"));
  Bytes nonce = from_hex("00000003020100a0a1a2a3a4a5");
  Bytes aad = from_hex("0001020304050607");
  Bytes pt = from_hex("08090a0b0c0d0e0f1011121314151617");
  Bytes sealed = ccm_seal_trunc(aes, nonce.data(), nonce.size(), aad, pt, 4);

  Bytes bad = sealed;
  bad[0] ^= 0x01;
  CHECK(!ccm_open_trunc(aes, nonce.data(), nonce.size(), aad, bad, 4));
  bad = sealed;
  bad.back() ^= 0x80;
  CHECK(!ccm_open_trunc(aes, nonce.data(), nonce.size(), aad, bad, 4));
  Bytes bad_aad = aad;
  bad_aad[3] ^= 0xff;
  CHECK(!ccm_open_trunc(aes, nonce.data(), nonce.size(), bad_aad, sealed, 4));
  Bytes short_in(sealed.begin(), sealed.begin() + 3);
  CHECK(!ccm_open_trunc(aes, nonce.data(), nonce.size(), aad, short_in, 4));
}

TEST_CASE("ccm roundtrips across payload and aad sizes") {
  auto rng = derive_stream(11, "ccm.roundtrip");
  Aes128 aes(rng.bytes(16));
  for (size_t plen : {0u, 1u, 15u, 16u, 17u, 40u}) {
    for (size_t alen : {0u, 1u, 14u, 16u, 33u}) {
      Bytes nonce = rng.bytes(13);
      Bytes aad = rng.bytes(alen);
      Bytes pt = rng.bytes(plen);
      Bytes sealed = ccm_seal_trunc(aes, nonce.data(), 13, aad, pt, 8);
      auto opened = ccm_open_trunc(aes, nonce.data(), 13, aad, sealed, 8);
      REQUIRE(opened.has_value());
      CHECK(*opened == pt);
    }
  }
}

TEST_CASE("ccm parameter validation") {
  Aes128 aes(Bytes(16, 0));
  Bytes nonce(13, 0);
  CHECK_THROWS_AS(ccm_seal(aes, nonce.data(), 13, {}, {}, 3), InvalidParams);
  CHECK_THROWS_AS(ccm_seal(aes, nonce.data(), 13, {}, {}, 7), InvalidParams);
  CHECK_THROWS_AS(ccm_seal_trunc(aes, nonce.data(), 13, {}, {}, 0),
                  InvalidParams);
  CHECK_THROWS_AS(ccm_seal_trunc(aes, nonce.data(), 13, {}, {}, 17),
                  InvalidParams);
  CHECK_THROWS_AS(ccm_seal_trunc(aes, nonce.data(), 6, {}, {}, 8),
                  InvalidParams);
  CHECK_THROWS_AS(ccm_seal_trunc(aes, nonce.data(), 14, {}, {}, 8),
                  InvalidParams);
}

TEST_CASE("ctr keystream application is an involution") {
  auto rng = derive_stream(3, "ccm.ctr");
  Aes128 aes(rng.bytes(16));
  Bytes nonce = rng.bytes(13);
  Bytes data = rng.bytes(37);
  Bytes orig = data;
  ccm_ctr_xor(aes, nonce.data(), 13, data.data(), data.size());
  CHECK(data != orig);
  ccm_ctr_xor(aes, nonce.data(), 13, data.data(), data.size());
  CHECK(data == orig);
}

TEST_CASE("constant-time compare") {
  Bytes a = from_hex("00112233"), b = from_hex("00112233"),
        c = from_hex("00112234");
  CHECK(ct_equal(a.data(), b.data(), 4));
  CHECK(!ct_equal(a.data(), c.data(), 4));
}

TEST_CASE("hex codecs roundtrip") {
  Bytes b = from_hex("deadBEEF00");
  CHECK(to_hex(b) == "deadbeef00");
  CHECK(from_hex(to_hex(b)) == b);
  CHECK(from_hex("").empty());
  CHECK_THROWS(from_hex("abc"));
  CHECK_THROWS(from_hex("zz"));
}

TEST_CASE("labeled rng streams are deterministic and independent") {
  auto a1 = derive_stream(42, "medium.noise");
  auto a2 = derive_stream(42, "medium.noise");
  auto b = derive_stream(42, "attack.jammer");
  bool same = true, differ = false;
  for (int i = 0; i < 16; ++i) {
    uint64_t x = a1.next();
    same = same && x == a2.next();
    differ = differ || x != b.next();
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("rng draws stay in range") {
  auto rng = derive_stream(1, "rng.range");
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.below(7) < 7);
    double u = rng.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  auto sorted = v;
  rng.shuffle(v);
  auto resorted = v;
  std::sort(resorted.begin(), resorted.end());
  CHECK(resorted == sorted);
}

TEST_CASE("geometric skip has the right mean") {
  auto rng = derive_stream(5, "rng.geom");
  double p = 0.01;
  uint64_t total = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) total += rng.geometric_skip(p);
  double mean = double(total) / n;
  // expected (1-p)/p = 99
  CHECK(mean > 96.0);
  CHECK(mean < 102.0);
}
