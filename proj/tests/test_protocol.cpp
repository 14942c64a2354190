#include <catch2/catch_amalgamated.hpp>

#include "iolw/rng.hpp"
#include "iolw/schedule.hpp"

using namespace iolw;

namespace {

CellConfig small_cell(int devices, SlotKind kind = SlotKind::SSlot,
                      SecurityMode mode = SecurityMode::legacy()) {
  CellConfig cfg;
  MasterConfig m;
  m.master_id = 0x100;
  TrackConfig t;
  t.track_id = 1;
  for (int i = 0; i < devices; ++i) {
    SlotConfig s;
    s.slot_id = i;
    s.device = DeviceConfig{0x9000u + uint64_t(i), kind, mode, false};
    t.slots.push_back(s);
  }
  m.tracks.push_back(t);
  cfg.masters.push_back(m);
  return cfg;
}

} // namespace

TEST_CASE("a minimal cell builds and yields one grant per slot per sub-cycle") {
  Cell cell = build_cell(small_cell(8));
  auto grants = schedule_cycle(cell, 1, 0);
  CHECK(grants.size() == 8 * 3);
  for (int sub = 0; sub < 3; ++sub) {
    std::set<int> slots;
    for (const auto& g : grants)
      if (g.sub_cycle_index == sub) slots.insert(g.slot_id);
    CHECK(slots.size() == 8);
  }
}

TEST_CASE("cell capacity limits") {
  // 3 masters x 5 tracks x 8 SSlots = 120 units: accepted
  CellConfig cfg;
  uint64_t uid = 1;
  for (int mi = 0; mi < 3; ++mi) {
    MasterConfig m;
    m.master_id = uint32_t(mi + 1);
    for (int ti = 0; ti < 5; ++ti) {
      TrackConfig t;
      t.track_id = mi * 5 + ti;
      for (int si = 0; si < 8; ++si) {
        SlotConfig s;
        s.slot_id = si;
        s.device = DeviceConfig{uid++, SlotKind::SSlot, {}, false};
        t.slots.push_back(s);
      }
      m.tracks.push_back(t);
    }
    cfg.masters.push_back(m);
  }
  Cell cell = build_cell(cfg);
  CHECK(cell.tracks.size() == 15);

  // 61 DSlot devices = 122 units: rejected
  CellConfig over;
  uid = 1;
  int made = 0;
  for (int mi = 0; mi < 3 && made < 61; ++mi) {
    MasterConfig m;
    m.master_id = uint32_t(mi + 1);
    for (int ti = 0; ti < 5 && made < 61; ++ti) {
      TrackConfig t;
      t.track_id = mi * 5 + ti;
      for (int si = 0; si < 8 && made < 61; ++si) {
        SlotConfig s;
        s.slot_id = si;
        s.device = DeviceConfig{uid++, SlotKind::DSlot, {}, false};
        t.slots.push_back(s);
        ++made;
      }
      m.tracks.push_back(t);
    }
    over.masters.push_back(m);
  }
  CHECK_THROWS_AS(build_cell(over), CapacityExceeded);
}

TEST_CASE("cell structural validation") {
  CHECK_THROWS_AS(build_cell(CellConfig{}), CapacityExceeded); // zero masters

  auto cfg = small_cell(2);
  cfg.masters.push_back(cfg.masters[0]); // duplicate master id and uids
  CHECK_THROWS_AS(build_cell(cfg), DuplicateId);

  cfg = small_cell(2);
  cfg.masters[0].tracks[0].slots[1].device->device_uid =
      cfg.masters[0].tracks[0].slots[0].device->device_uid;
  CHECK_THROWS_AS(build_cell(cfg), DuplicateId);

  cfg = small_cell(2);
  cfg.masters[0].tracks[0].slots[1].slot_id = 0;
  CHECK_THROWS_AS(build_cell(cfg), DuplicateId);

  cfg = small_cell(9);
  CHECK_THROWS_AS(build_cell(cfg), CapacityExceeded);

  cfg = small_cell(1);
  cfg.timing.sub_cycles_per_cycle = 2;
  CHECK_THROWS_AS(build_cell(cfg), ConfigInvalid);
}

TEST_CASE("secured SSlot devices are rejected at build time") {
  auto cfg = small_cell(1, SlotKind::SSlot, SecurityMode::secured_tau(32));
  CHECK_THROWS_AS(build_cell(cfg), ConfigInvalid);
  auto ok = small_cell(1, SlotKind::DSlot, SecurityMode::secured_tau(32));
  CHECK_NOTHROW(build_cell(ok));
}

TEST_CASE("single slot track gets three grants on consecutive table channels") {
  Cell cell = build_cell(small_cell(1));
  auto grants = schedule_cycle(cell, 1, 0);
  REQUIRE(grants.size() == 3);
  const auto& seq = cell.track(1).table.sequence;
  for (int sub = 0; sub < 3; ++sub) {
    CHECK(grants[sub].sub_cycle_index == sub);
    CHECK(grants[sub].channel_index == seq[sub]);
    CHECK(grants[sub].slot_id == 0);
    CHECK(grants[sub].direction == Direction::Downlink);
  }
}

TEST_CASE("hop sequence continues across cycle boundaries") {
  Cell cell = build_cell(small_cell(1));
  const auto& table = cell.track(1).table;
  auto c0 = schedule_cycle(cell, 1, 0);
  auto c1 = schedule_cycle(cell, 1, 1);
  CHECK(c1[0].channel_index == next_channel(table, 3));
  CHECK(c1[1].channel_index == next_channel(table, 4));
  auto far = schedule_cycle(cell, 1, 1000);
  CHECK(far[0].channel_index == next_channel(table, 3000));
}

TEST_CASE("slots that succeeded drop out of later sub-cycles") {
  Cell cell = build_cell(small_cell(2));
  // slot 0 succeeds in sub-cycle 0; slot 1 keeps failing
  std::vector<std::set<int>> fb = {{0}, {}, {}};
  auto grants = schedule_cycle_with(cell, 1, 0, fb);
  int slot0 = 0, slot1 = 0;
  for (const auto& g : grants) (g.slot_id == 0 ? slot0 : slot1)++;
  CHECK(slot0 == 1);
  CHECK(slot1 == 3);
}

TEST_CASE("grant lists are pure functions of their inputs") {
  Cell a = build_cell(small_cell(5));
  Cell b = build_cell(small_cell(5));
  CHECK(schedule_cycle(a, 1, 7) == schedule_cycle(b, 1, 7));
}

TEST_CASE("unknown track is rejected") {
  Cell cell = build_cell(small_cell(1));
  CHECK_THROWS_AS(schedule_cycle(cell, 99, 0), UnknownTrack);
}

TEST_CASE("two tracks of one master hop on different channels") {
  CellConfig cfg;
  MasterConfig m;
  m.master_id = 0x55;
  for (int ti = 0; ti < 2; ++ti) {
    TrackConfig t;
    t.track_id = ti;
    SlotConfig s;
    s.slot_id = 0;
    s.device = DeviceConfig{0xA000u + uint64_t(ti), SlotKind::SSlot, {}, false};
    t.slots.push_back(s);
    m.tracks.push_back(t);
  }
  cfg.masters.push_back(m);
  Cell cell = build_cell(cfg);
  // identical sequences would collide every sub-cycle; require difference
  CHECK(cell.track(0).table.sequence != cell.track(1).table.sequence);
}

TEST_CASE("control octet roundtrips and rejects invalid encodings") {
  for (auto dir : {Direction::Downlink, Direction::Uplink})
    for (uint8_t retry : {0, 1, 2})
      for (bool service : {false, true})
        for (bool pairing : {false, true}) {
          ControlBits c{dir, retry, service, pairing};
          CHECK(decode_control(encode_control(c)) == c);
        }
  CHECK_THROWS_AS(encode_control({Direction::Downlink, 3, false, false}),
                  MalformedFrame);
  CHECK_THROWS_AS(decode_control(0x20), MalformedFrame);
  CHECK_THROWS_AS(decode_control(0x80), MalformedFrame);
  CHECK_THROWS_AS(decode_control(0x06), MalformedFrame); // retry == 3
}

TEST_CASE("legacy frames roundtrip") {
  Frame f;
  f.kind = SlotKind::SSlot;
  f.payload = {0xAB};
  Bytes wire = encode_frame(f);
  CHECK(wire.size() == 2);
  CHECK(decode_frame(SlotKind::SSlot, SecurityMode::legacy(), wire) == f);

  Frame d;
  d.kind = SlotKind::DSlot;
  d.payload = Bytes(14, 0x5A);
  Bytes dw = encode_frame(d);
  CHECK(dw.size() == 15);
  CHECK(decode_frame(SlotKind::DSlot, SecurityMode::legacy(), dw) == d);
}

TEST_CASE("legacy capacity limits are enforced") {
  Frame f;
  f.kind = SlotKind::SSlot;
  f.payload = {1, 2};
  CHECK_THROWS_AS(encode_frame(f), MalformedFrame);
  f.kind = SlotKind::DSlot;
  f.payload = Bytes(15, 0);
  CHECK_THROWS_AS(encode_frame(f), MalformedFrame);
}

TEST_CASE("secured DSlot frame layout at tau=32") {
  Frame f;
  f.kind = SlotKind::DSlot;
  f.mode = SecurityMode::secured_tau(32);
  f.counter = 0x01020304;
  f.payload = from_hex("a1a2a3a4a5a6"); // 6 bytes, at capacity
  f.tag = from_hex("d1d2d3d4");
  Bytes wire = encode_frame(f);
  REQUIRE(wire.size() == 15); // control + 14 net octets
  CHECK(wire[1] == 0x01);
  CHECK(wire[4] == 0x04);
  CHECK(decode_frame(SlotKind::DSlot, f.mode, wire) == f);

  f.payload.push_back(0xFF); // 7 bytes exceeds tau=32 capacity
  CHECK_THROWS_AS(encode_frame(f), MalformedFrame);
}

TEST_CASE("secured payload capacity follows the tag length") {
  CHECK(secured_payload_capacity(8) == 9);
  CHECK(secured_payload_capacity(16) == 8);
  CHECK(secured_payload_capacity(24) == 7);
  CHECK(secured_payload_capacity(32) == 6);
  CHECK(secured_payload_capacity(64) == 2);
}

TEST_CASE("secured frame decode rejects malformed input") {
  auto mode = SecurityMode::secured_tau(32);
  CHECK_THROWS_AS(decode_frame(SlotKind::DSlot, mode, {}), MalformedFrame);
  CHECK_THROWS_AS(decode_frame(SlotKind::DSlot, mode, from_hex("000102")),
                  MalformedFrame);
  CHECK_THROWS_AS(decode_frame(SlotKind::SSlot, mode, Bytes(9, 0)),
                  MalformedFrame);
  // 15-byte payload cannot fit any secured frame
  Frame f;
  f.kind = SlotKind::DSlot;
  f.mode = mode;
  f.payload = Bytes(15, 1);
  f.tag = Bytes(4, 0);
  CHECK_THROWS_AS(encode_frame(f), MalformedFrame);
}

TEST_CASE("secured SSlot frames are not representable") {
  Frame f;
  f.kind = SlotKind::SSlot;
  f.mode = SecurityMode::secured_tau(32);
  f.tag = Bytes(4, 0);
  CHECK_THROWS_AS(encode_frame(f), MalformedFrame);
}

TEST_CASE("frame encode/decode roundtrip over randomized valid frames") {
  auto rng = derive_stream(31337, "test.frame.prop");
  for (int i = 0; i < 2000; ++i) {
    Frame f;
    bool secured = rng.unit() < 0.5;
    f.kind = secured ? SlotKind::DSlot
                     : (rng.unit() < 0.5 ? SlotKind::SSlot : SlotKind::DSlot);
    if (secured) {
      unsigned taus[] = {8, 16, 24, 32, 64};
      f.mode = SecurityMode::secured_tau(taus[rng.below(5)]);
      f.counter = uint32_t(rng.next());
      f.payload = rng.bytes(rng.below(secured_payload_capacity(f.mode.tau_bits) + 1));
      f.tag = rng.bytes(f.mode.tag_bytes());
    } else {
      size_t cap = f.kind == SlotKind::SSlot ? kLegacySSlotPayloadMax
                                             : kLegacyDSlotPayloadMax;
      f.payload = rng.bytes(rng.below(cap + 1));
    }
    f.control.direction = rng.unit() < 0.5 ? Direction::Downlink : Direction::Uplink;
    f.control.retry = uint8_t(rng.below(3));
    f.control.service = rng.unit() < 0.2;
    f.control.pairing = rng.unit() < 0.2;
    Bytes wire = encode_frame(f);
    CHECK(decode_frame(f.kind, f.mode, wire) == f);
  }
}
