#include <catch2/catch_amalgamated.hpp>

#include "iolw/rng.hpp"
#include "iolw/secure_link.hpp"

using namespace iolw;

namespace {

Bytes secret() { return from_hex("000102030405060708090a0b0c0d0e0f"); }

} // namespace

TEST_CASE("key derivation is deterministic and identity-separated") {
  auto a = establish_link(secret(), 1, 2, 32);
  auto b = establish_link(secret(), 1, 2, 32);
  CHECK(a.key == b.key);
  CHECK(a.key != establish_link(secret(), 1, 3, 32).key);
  CHECK(a.key != establish_link(secret(), 2, 2, 32).key);
  CHECK(a.key != establish_link(secret(), 1, 2, 64).key);
}

TEST_CASE("uid collisions in the key derivation are absent at sample scale") {
  auto rng = derive_stream(17, "test.link.kdf");
  std::set<Bytes> keys;
  for (int i = 0; i < 10000; ++i) {
    uint64_t uid = rng.next();
    keys.insert(derive_link_key(secret(), 1, uid, 32));
  }
  CHECK(keys.size() == 10000);
}

TEST_CASE("weak secrets are rejected") {
  CHECK_THROWS_AS(establish_link(Bytes(8, 1), 1, 2, 32), WeakSecret);
  CHECK_NOTHROW(establish_link(Bytes(16, 1), 1, 2, 32));
  CHECK_NOTHROW(establish_link(Bytes(24, 1), 1, 2, 32));
}

TEST_CASE("seal then open roundtrips") {
  auto dev = establish_link(secret(), 0xAA, 0xBEEF, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 0xAA, 0xBEEF, 32, LinkRole::Master);
  Bytes header = {0x01};
  Bytes payload = from_hex("deadbeef0102");
  auto sealed = seal(dev, header, payload);
  CHECK(sealed.counter == 1);
  CHECK(sealed.tag.size() == 4);
  CHECK(sealed.ciphertext != payload);
  auto opened = open(mst, sealed.counter, header, sealed.ciphertext, sealed.tag);
  CHECK(opened.status == OpenStatus::Accepted);
  CHECK(opened.payload == payload);
  CHECK(mst.rx_highwater == 1);
}

TEST_CASE("two seals of the same payload differ") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  Bytes payload = from_hex("a0a1a2a3");
  auto s1 = seal(dev, {}, payload);
  auto s2 = seal(dev, {}, payload);
  CHECK(s1.counter != s2.counter);
  CHECK((s1.ciphertext != s2.ciphertext || s1.tag != s2.tag));
}

TEST_CASE("uplink and downlink counter spaces are separate") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 1, 2, 32, LinkRole::Master);
  Bytes payload = from_hex("0102");
  auto up = seal(dev, {}, payload);
  auto down = seal(mst, {}, payload);
  CHECK(up.counter == down.counter); // same number, different direction
  // the downlink frame must not open as an uplink at the master
  auto cross = open(mst, down.counter, {}, down.ciphertext, down.tag);
  CHECK(cross.status == OpenStatus::AuthFailure);
  auto dv = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto ok = open(dv, down.counter, {}, down.ciphertext, down.tag);
  CHECK(ok.status == OpenStatus::Accepted);
}

TEST_CASE("replayed frames are rejected without counting as auth failures") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 1, 2, 32, LinkRole::Master);
  auto sealed = seal(dev, {}, from_hex("33"));
  CHECK(open(mst, sealed.counter, {}, sealed.ciphertext, sealed.tag).status ==
        OpenStatus::Accepted);
  for (int i = 0; i < 5; ++i) {
    auto r = open(mst, sealed.counter, {}, sealed.ciphertext, sealed.tag);
    CHECK(r.status == OpenStatus::ReplayRejected);
  }
  CHECK(mst.consecutive_auth_failures == 0);
  CHECK(mst.state == LinkState::Active);
}

TEST_CASE("no replayed counter is ever accepted across shuffled deliveries") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 1, 2, 32, LinkRole::Master);
  std::vector<SealResult> frames;
  for (int i = 0; i < 50; ++i) frames.push_back(seal(dev, {}, from_hex("aa")));
  auto rng = derive_stream(3, "test.link.replay");
  // deliver in random order, then replay everything; accepted counters must
  // be strictly increasing and unique
  rng.shuffle(frames);
  std::set<uint32_t> accepted;
  uint64_t highwater = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& f : frames) {
      auto r = open(mst, f.counter, {}, f.ciphertext, f.tag);
      if (r.status == OpenStatus::Accepted) {
        CHECK(f.counter > highwater);
        highwater = f.counter;
        CHECK(accepted.insert(f.counter).second);
      }
    }
  }
  CHECK(mst.rx_highwater == 50);
}

TEST_CASE("tampered frames fail authentication") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 1, 2, 32, LinkRole::Master);
  auto sealed = seal(dev, {0x01}, from_hex("c0ffee"));
  auto probe = [&](const Bytes& header, uint32_t counter, const Bytes& ct,
                   const Bytes& tag) {
    auto st = open(mst, counter, header, ct, tag).status;
    mst.consecutive_auth_failures = 0; // keep probes independent of lockout
    return st;
  };
  auto bad_ct = sealed.ciphertext;
  bad_ct[0] ^= 0x01;
  CHECK(probe({0x01}, sealed.counter, bad_ct, sealed.tag) ==
        OpenStatus::AuthFailure);
  auto bad_tag = sealed.tag;
  bad_tag[0] ^= 0x80;
  CHECK(probe({0x01}, sealed.counter, sealed.ciphertext, bad_tag) ==
        OpenStatus::AuthFailure);
  CHECK(probe({0x01}, sealed.counter + 1, sealed.ciphertext, sealed.tag) ==
        OpenStatus::AuthFailure);
  CHECK(probe({0x02}, sealed.counter, sealed.ciphertext, sealed.tag) ==
        OpenStatus::AuthFailure);
  // untouched frame still accepted afterwards
  CHECK(open(mst, sealed.counter, {0x01}, sealed.ciphertext, sealed.tag)
            .status == OpenStatus::Accepted);
}

TEST_CASE("three consecutive bad tags trip the fail state") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 1, 2, 32, LinkRole::Master);
  auto sealed = seal(dev, {}, from_hex("55"));
  Bytes bad_tag = sealed.tag;
  bad_tag[0] ^= 0xFF;
  for (int i = 0; i < 2; ++i) {
    CHECK(open(mst, sealed.counter, {}, sealed.ciphertext, bad_tag).status ==
          OpenStatus::AuthFailure);
    CHECK(mst.state == LinkState::Active);
  }
  CHECK(open(mst, sealed.counter, {}, sealed.ciphertext, bad_tag).status ==
        OpenStatus::AuthFailure);
  CHECK(mst.state == LinkState::FailState);
  CHECK(mst.consecutive_auth_failures == 3);
  // nothing is accepted in fail state, not even a genuine frame
  CHECK(open(mst, sealed.counter, {}, sealed.ciphertext, sealed.tag).status ==
        OpenStatus::LinkInFailState);
  CHECK_THROWS_AS(seal(mst, {}, {}), LinkInFailState);
}

TEST_CASE("successes reset the consecutive failure count") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 1, 2, 32, LinkRole::Master);
  for (int round = 0; round < 4; ++round) {
    auto good = seal(dev, {}, from_hex("77"));
    Bytes bad_tag = good.tag;
    bad_tag[0] ^= 1;
    CHECK(open(mst, good.counter, {}, good.ciphertext, bad_tag).status ==
          OpenStatus::AuthFailure);
    CHECK(open(mst, good.counter, {}, good.ciphertext, bad_tag).status ==
          OpenStatus::AuthFailure);
    CHECK(open(mst, good.counter, {}, good.ciphertext, good.tag).status ==
          OpenStatus::Accepted);
    CHECK(mst.consecutive_auth_failures == 0);
    CHECK(mst.state == LinkState::Active);
  }
}

TEST_CASE("reconfiguration requires fail state and rotates the key") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  auto mst = establish_link(secret(), 1, 2, 32, LinkRole::Master);
  CHECK_THROWS_AS(reconfigure(mst, secret()), NotInFailState);

  auto sealed = seal(dev, {}, from_hex("11"));
  Bytes bad = sealed.tag;
  bad[0] ^= 1;
  for (int i = 0; i < 3; ++i) open(mst, sealed.counter, {}, sealed.ciphertext, bad);
  REQUIRE(mst.state == LinkState::FailState);

  Bytes fresh = from_hex("101112131415161718191a1b1c1d1e1f");
  auto mst2 = reconfigure(mst, fresh);
  CHECK(mst2.state == LinkState::Active);
  CHECK(mst2.rx_highwater == 0);
  CHECK(mst2.consecutive_auth_failures == 0);
  CHECK(mst2.key != mst.key);
  // frames sealed under the old key fail against the new one
  CHECK(open(mst2, sealed.counter, {}, sealed.ciphertext, sealed.tag).status ==
        OpenStatus::AuthFailure);
}

TEST_CASE("counter exhaustion is an error, not a wrap") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  dev.tx_counter = kCounterMax - 1;
  CHECK_NOTHROW(seal(dev, {}, {}));
  CHECK(dev.tx_counter == kCounterMax);
  CHECK_THROWS_AS(seal(dev, {}, {}), CounterExhausted);
}

TEST_CASE("payload capacity is enforced at seal time") {
  auto dev = establish_link(secret(), 1, 2, 32, LinkRole::Device);
  CHECK_NOTHROW(seal(dev, {}, Bytes(6, 0)));
  CHECK_THROWS_AS(seal(dev, {}, Bytes(7, 0)), MalformedFrame);
  auto dev64 = establish_link(secret(), 1, 2, 64, LinkRole::Device);
  CHECK_NOTHROW(seal(dev64, {}, Bytes(2, 0)));
  CHECK_THROWS_AS(seal(dev64, {}, Bytes(3, 0)), MalformedFrame);
}

TEST_CASE("random 8-bit tags are accepted at the 2^-8 rate") {
  auto mst = establish_link(secret(), 9, 9, 8, LinkRole::Master);
  auto rng = derive_stream(4242, "test.link.forge8");
  const int trials = 1000000;
  int accepted = 0;
  Bytes header = {0x01};
  Bytes ct(4), tag(1);
  for (int i = 0; i < trials; ++i) {
    rng.fill(ct.data(), ct.size());
    rng.fill(tag.data(), tag.size());
    auto r = open(mst, uint32_t(mst.rx_highwater + 1), header, ct, tag);
    if (r.status == OpenStatus::Accepted) ++accepted;
    mst.consecutive_auth_failures = 0; // keep the oracle answering
    mst.state = LinkState::Active;
  }
  double p = 1.0 / 256.0;
  double expect = trials * p;
  double sigma = std::sqrt(trials * p * (1 - p));
  INFO("accepted=" << accepted << " expect=" << expect << " sigma=" << sigma);
  CHECK(std::abs(accepted - expect) <= 3 * sigma);
}
