#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "iolw/hopping.hpp"

using namespace iolw;

namespace {

void check_table_invariants(const HoppingTable& t) {
  std::vector<int> expect = usable_channels(t.blocklist);
  std::vector<int> got = t.sequence;
  std::sort(got.begin(), got.end());
  REQUIRE(got == expect);

  const size_t n = t.sequence.size();
  for (size_t i = 0; i < n; ++i) {
    int a = carrier_frequency_mhz(t.sequence[i]);
    int b = carrier_frequency_mhz(t.sequence[(i + 1) % n]);
    REQUIRE(std::abs(a - b) >= t.min_hop_distance_mhz);
  }
}

} // namespace

TEST_CASE("carrier frequency formula and range") {
  CHECK(carrier_frequency_mhz(3) == 2403);
  CHECK(carrier_frequency_mhz(78) == 2478);
  CHECK(carrier_frequency_mhz(1) == 2401);
  CHECK(carrier_frequency_mhz(80) == 2480);
  CHECK_THROWS_AS(carrier_frequency_mhz(0), ChannelOutOfRange);
  CHECK_THROWS_AS(carrier_frequency_mhz(81), ChannelOutOfRange);
}

TEST_CASE("empty blocklist yields a permutation of channels 3..77") {
  auto t = generate_table(0xA11CE, {});
  CHECK(t.sequence.size() == 75);
  check_table_invariants(t);
}

TEST_CASE("blocklisted channels never appear") {
  Blocklist bl;
  bl.add_spec("3-25");
  auto t = generate_table(7, bl);
  CHECK(t.sequence.size() == 52);
  for (int c : t.sequence) CHECK(c > 25);
  check_table_invariants(t);
}

TEST_CASE("blocklist parsing accepts indices and ranges") {
  Blocklist bl;
  bl.add_spec("17");
  bl.add_spec("40-42");
  CHECK(bl.contains(17));
  CHECK(bl.contains(40));
  CHECK(bl.contains(41));
  CHECK(bl.contains(42));
  CHECK(!bl.contains(39));
  CHECK_THROWS_AS(bl.add_spec("0"), ChannelOutOfRange);
  CHECK_THROWS_AS(bl.add_spec("81"), ChannelOutOfRange);
  CHECK_THROWS_AS(bl.add_spec("abc"), ConfigInvalid);
}

TEST_CASE("generation is deterministic") {
  Blocklist bl;
  bl.add_range(30, 40);
  auto a = generate_table(12345, bl);
  auto b = generate_table(12345, bl);
  CHECK(a.sequence == b.sequence);
}

TEST_CASE("distinct master ids give distinct sequences") {
  auto rng = derive_stream(99, "test.hopping.ids");
  int distinct = 0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i) {
    uint32_t a = uint32_t(rng.next());
    uint32_t b = uint32_t(rng.next());
    if (a == b) {
      ++distinct;
      continue;
    }
    auto ta = generate_table(a, {});
    auto tb = generate_table(b, {});
    bool differ = false;
    for (size_t k = 0; k < 8; ++k)
      if (ta.sequence[k] != tb.sequence[k]) differ = true;
    if (differ) ++distinct;
  }
  CHECK(distinct >= 990);
}

TEST_CASE("too few channels is rejected") {
  Blocklist bl;
  bl.add_range(3, 70); // leaves 71..77, only 7 channels
  CHECK_THROWS_AS(generate_table(1, bl), TooFewChannels);
}

TEST_CASE("infeasible hop distance is rejected") {
  Blocklist bl; // leave 8 channels clustered within 20 MHz
  for (int c = kUsableLow; c <= kUsableHigh; ++c)
    if (c < 50 || c > 57) bl.add(c);
  CHECK_THROWS_AS(generate_table(1, bl, 24), TooFewChannels);
  // the same channels are fine with a small hop requirement
  auto t = generate_table(1, bl, 1);
  check_table_invariants(t);
}

TEST_CASE("next_channel walks the sequence cyclically") {
  auto t = generate_table(5, {});
  CHECK(next_channel(t, 0) == t.sequence[0]);
  CHECK(next_channel(t, 1) == t.sequence[1]);
  CHECK(next_channel(t, t.sequence.size()) == t.sequence[0]);
  CHECK(next_channel(t, 3 * t.sequence.size() + 2) == t.sequence[2]);
}

TEST_CASE("adaptive switch bumps the generation and respects the new blocklist") {
  auto t = generate_table(42, {});
  Blocklist bl;
  bl.add_range(60, 70);
  auto t2 = adaptive_switch(t, bl);
  CHECK(t2.generation == t.generation + 1);
  CHECK(t2.master_id == t.master_id);
  for (int c : t2.sequence) CHECK((c < 60 || c > 70));
  check_table_invariants(t2);

  // unchanged blocklist: new generation, same channel set, new order likely
  auto t3 = adaptive_switch(t, {});
  CHECK(t3.generation == t.generation + 1);
  auto sorted = [](std::vector<int> v) { std::sort(v.begin(), v.end()); return v; };
  CHECK(sorted(t3.sequence) == sorted(t.sequence));
}

TEST_CASE("randomized seeds and blocklists keep all table invariants") {
  auto rng = derive_stream(2024, "test.hopping.prop");
  for (int i = 0; i < 1000; ++i) {
    Blocklist bl;
    int blocked = 0;
    for (int c = kUsableLow; c <= kUsableHigh && blocked < 28; ++c) {
      if (rng.unit() < 0.15) {
        bl.add(c);
        ++blocked;
      }
    }
    uint32_t id = uint32_t(rng.next());
    auto t = generate_table(id, bl);
    check_table_invariants(t);
  }
}

TEST_CASE("wlan overlap blocklist works across many seeds") {
  Blocklist bl;
  bl.add_spec("3-25");
  auto rng = derive_stream(77, "test.hopping.wlan");
  for (int i = 0; i < 200; ++i) {
    auto t = generate_table(uint32_t(rng.next()), bl);
    check_table_invariants(t);
  }
}

TEST_CASE("serialized table image lists length then channels") {
  auto t = generate_table(9, {});
  Bytes img = serialize_table(t);
  REQUIRE(img.size() == t.sequence.size() + 1);
  CHECK(img[0] == t.sequence.size());
  for (size_t i = 0; i < t.sequence.size(); ++i)
    CHECK(img[i + 1] == t.sequence[i]);
}
