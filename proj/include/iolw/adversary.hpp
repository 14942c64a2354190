#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iolw/cell.hpp"
#include "iolw/errors.hpp"
#include "iolw/frame.hpp"
#include "iolw/hopping.hpp"
#include "iolw/rng.hpp"
#include "iolw/secure_link.hpp"
#include "iolw/trace.hpp"

namespace iolw {

enum class AttackKind : uint8_t {
  Flooding,
  Jamming,
  Replay,
  Forgery,
  ForgeryLeakedKey,
  CompromisedDevice,
};

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Flooding: return "flooding";
    case AttackKind::Jamming: return "jamming";
    case AttackKind::Replay: return "replay";
    case AttackKind::Forgery: return "forgery";
    case AttackKind::ForgeryLeakedKey: return "forgery_leaked_key";
    case AttackKind::CompromisedDevice: return "compromised_device";
  }
  return "?";
}

inline AttackKind attack_kind_from(const std::string& s) {
  if (s == "flooding") return AttackKind::Flooding;
  if (s == "jamming") return AttackKind::Jamming;
  if (s == "replay") return AttackKind::Replay;
  if (s == "forgery") return AttackKind::Forgery;
  if (s == "forgery_leaked_key") return AttackKind::ForgeryLeakedKey;
  if (s == "compromised_device") return AttackKind::CompromisedDevice;
  throw InvalidParams("unknown attack kind: " + s);
}

// Starting knowledge handed to the attacker by the scenario. Anything not
// granted must be learned on the air before it can be used.
struct KnowledgeGrants {
  bool iolw_config = false;
  bool hopping_table = false;
  bool counter_value = false;
  bool leaked_key = false;
};

struct PhysicalAccess {
  bool proximity = false;     // radio range of the cell
  bool device_access = false; // hands on a paired device
};

struct AttackSpec {
  AttackKind kind = AttackKind::Flooding;
  KnowledgeGrants grants;
  PhysicalAccess physical;
  uint64_t sniff_start = 0;
  uint64_t sniff_stop = 0;  // exclusive; equal to start disables sniffing
  uint64_t start_cycle = 0;
  uint64_t stop_cycle = 0;  // exclusive
  uint64_t target_uid = 0;
  int target_track = -1;
  int intensity = 8;          // flood bursts per sub-cycle / replays per cycle
  bool all_channels = true;   // jamming span
  std::set<int> channels;
  uint32_t counter_jump = 100000;

  void validate() const {
    if (stop_cycle < start_cycle)
      throw InvalidParams("attack window ends before it starts");
    if (sniff_stop < sniff_start)
      throw InvalidParams("sniff window ends before it starts");
    if (intensity < 1) throw InvalidParams("attack intensity must be >= 1");
    if (kind == AttackKind::Jamming && !all_channels && channels.empty())
      throw InvalidParams("channel-selective jamming lists no channels");
    bool needs_target = kind == AttackKind::Replay || kind == AttackKind::Forgery ||
                        kind == AttackKind::ForgeryLeakedKey ||
                        kind == AttackKind::CompromisedDevice;
    if (needs_target && target_uid == 0)
      throw InvalidParams("attack kind requires a target device uid");
  }
};

struct CapturedFrame {
  uint64_t global_sub = 0;
  int track_id = -1;
  int slot_id = -1;
  Direction leg = Direction::Uplink;
  Bytes wire;
  uint32_t counter = 0;
  uint64_t uid = 0;
};

struct AttackerBurst {
  int track_id = -1;
  int slot_id = -1;
  Direction leg = Direction::Downlink;
  int channel = 0;
  bool config_plane = false;
  Bytes wire;
  uint64_t claimed_uid = 0; // the link a crafted frame pretends to come from
};

struct AttackerAction {
  std::vector<AttackerBurst> bursts;
  bool jam_all = false;
  std::set<int> jam_channels;
};

struct PrereqReport {
  bool ok = true;
  std::vector<std::string> missing;
};

// Everything the attacker has learned plus per-kind planning. The engine
// feeds observations in while the attacker is in radio range and asks for an
// action once per sub-cycle inside the attack window.
class AttackerState {
public:
  AttackerState(AttackSpec spec, int attack_id, uint64_t root_seed)
      : spec_(std::move(spec)),
        attack_id_(attack_id),
        rng_(derive_stream(root_seed, "attacker." + std::to_string(attack_id))) {
    spec_.validate();
  }

  const AttackSpec& spec() const { return spec_; }
  int id() const { return attack_id_; }

  bool listening(uint64_t cycle) const {
    if (!spec_.physical.proximity) return false;
    return (cycle >= spec_.sniff_start && cycle < spec_.sniff_stop) ||
           (cycle >= spec_.start_cycle && cycle < spec_.stop_cycle);
  }
  bool attacking(uint64_t cycle) const {
    return cycle >= spec_.start_cycle && cycle < spec_.stop_cycle;
  }
  uint64_t first_activity_cycle() const {
    if (spec_.sniff_stop > spec_.sniff_start)
      return std::min(spec_.sniff_start, spec_.start_cycle);
    return spec_.start_cycle;
  }

  // Grant materialization: snapshots taken from the live cell the moment the
  // attacker first comes in range. Later table switches leave these stale.
  void grant_config() { config_known_ = true; }
  void grant_table(const HoppingTable& t) { table_ = t; }
  void grant_counter(uint64_t uid, uint32_t value) {
    auto& c = counters_[uid];
    c = std::max(c, value);
  }
  void grant_key(uint64_t uid, Bytes key) { keys_[uid] = std::move(key); }
  void learn_target_profile(uint32_t master_id, const DeviceConfig& dev) {
    target_master_ = master_id;
    target_mode_ = dev.security_mode;
    target_kind_ = dev.slot_kind;
  }

  bool has_table() const { return table_.has_value(); }
  bool table_current(const Cell& cell) const {
    if (!table_) return false;
    auto loc = cell.locate(spec_.target_uid);
    int tid = spec_.target_track;
    if (tid < 0 && loc) tid = loc->first;
    if (tid < 0 || !cell.tracks.count(tid)) return false;
    return cell.track(tid).table.generation == table_->generation;
  }
  const std::map<uint64_t, uint32_t>& counters() const { return counters_; }
  const std::set<uint64_t>& known_uids() const { return known_uids_; }
  const std::vector<CapturedFrame>& captures() const { return captures_; }
  bool config_known() const { return config_known_; }

  std::vector<KnowledgeKind> observe_pair_request(uint64_t uid) {
    std::vector<KnowledgeKind> gains;
    if (known_uids_.insert(uid).second) gains.push_back(KnowledgeKind::DeviceUid);
    if (!config_known_) {
      config_known_ = true;
      gains.push_back(KnowledgeKind::IolwConfig);
    }
    return gains;
  }

  std::vector<KnowledgeKind> observe_plain_table(const HoppingTable& t) {
    bool fresh = !table_ || table_->generation != t.generation;
    table_ = t;
    if (fresh) return {KnowledgeKind::HoppingTable};
    return {};
  }

  // Data-channel sniffing only works when the attacker can follow the hops.
  std::vector<KnowledgeKind> observe_data_burst(const Cell& cell, int track_id,
                                                int slot_id, Direction leg,
                                                int channel, uint64_t global_sub,
                                                const Bytes& wire, uint64_t uid,
                                                SecurityMode mode) {
    if (!table_) return {};
    if (next_channel(*table_, global_sub) != channel) return {};
    if (!cell.tracks.count(track_id) ||
        cell.track(track_id).table.generation != table_->generation)
      return {};
    std::vector<KnowledgeKind> gains;
    if (mode.secured() && wire.size() >= 1 + kCounterBytes) {
      uint32_t ctr = load_be32(wire.data() + 1);
      auto it = counters_.find(uid);
      bool first = it == counters_.end();
      if (first || ctr > it->second) counters_[uid] = ctr;
      if (first) gains.push_back(KnowledgeKind::CounterValue);
      if (leg == Direction::Uplink && captures_.size() < kMaxCaptures) {
        captures_.push_back(
            {global_sub, track_id, slot_id, leg, wire, ctr, uid});
      }
    }
    return gains;
  }

  PrereqReport check_prerequisites() const {
    PrereqReport r;
    auto need = [&](bool have, const char* what) {
      if (!have) {
        r.ok = false;
        r.missing.push_back(what);
      }
    };
    switch (spec_.kind) {
      case AttackKind::Flooding:
        need(spec_.physical.proximity, "radio proximity");
        need(config_known_, "iolw config");
        need(table_.has_value(), "hopping table");
        break;
      case AttackKind::Jamming:
        need(spec_.physical.proximity, "radio proximity");
        break;
      case AttackKind::Replay:
        need(spec_.physical.proximity, "radio proximity");
        need(table_.has_value(), "hopping table");
        need(!captures_.empty(), "sniffed valid traffic");
        break;
      case AttackKind::Forgery:
        need(spec_.physical.proximity, "radio proximity");
        need(table_.has_value(), "hopping table");
        need(counters_.count(spec_.target_uid) != 0, "current counter value");
        break;
      case AttackKind::ForgeryLeakedKey:
        need(spec_.physical.proximity, "radio proximity");
        need(keys_.count(spec_.target_uid) != 0, "leaked link key");
        need(counters_.count(spec_.target_uid) != 0, "current counter value");
        break;
      case AttackKind::CompromisedDevice:
        need(spec_.physical.device_access, "device access");
        break;
    }
    return r;
  }

  void set_prereqs(PrereqReport r) { prereqs_ = std::move(r); }
  const PrereqReport& prereqs() const { return prereqs_; }

  // One action per sub-cycle inside the attack window.
  AttackerAction plan(const Cell&, uint64_t cycle, int sub, uint64_t global_sub,
                      bool master_in_pairing_mode) {
    AttackerAction act;
    if (!attacking(cycle) || !prereqs_.ok) return act;
    switch (spec_.kind) {
      case AttackKind::Flooding: plan_flood(act, master_in_pairing_mode); break;
      case AttackKind::Jamming:
        act.jam_all = spec_.all_channels;
        act.jam_channels = spec_.channels;
        break;
      case AttackKind::Replay: plan_replay(act, cycle, sub, global_sub); break;
      case AttackKind::Forgery: plan_forgery(act, global_sub, false); break;
      case AttackKind::ForgeryLeakedKey: plan_forgery(act, global_sub, true); break;
      case AttackKind::CompromisedDevice: break; // acts through the device
    }
    return act;
  }

  // Compromised-device hook: payload the captive device should send instead
  // of its own. Also records what the attacker got to read.
  std::optional<Bytes> substitute_uplink(uint64_t cycle, uint64_t uid,
                                         size_t capacity) {
    if (spec_.kind != AttackKind::CompromisedDevice || !attacking(cycle))
      return std::nullopt;
    if (!prereqs_.ok || uid != spec_.target_uid) return std::nullopt;
    size_t n = std::min<size_t>(capacity, 4);
    Bytes payload;
    payload.reserve(n);
    for (size_t i = 0; i < n; ++i)
      payload.push_back(uint8_t(0xA0 | ((cycle + i) & 0x0F)));
    return payload;
  }

  bool exfiltrating(uint64_t cycle, uint64_t uid) const {
    return spec_.kind == AttackKind::CompromisedDevice && prereqs_.ok &&
           attacking(cycle) && uid == spec_.target_uid;
  }

  uint64_t injections = 0;

private:
  static constexpr size_t kMaxCaptures = 256;

  int attack_channel(uint64_t global_sub) const {
    return next_channel(*table_, global_sub);
  }

  void plan_flood(AttackerAction& act, bool pairing_mode) {
    if (!pairing_mode) return; // nobody listening on the config channels
    for (int i = 0; i < spec_.intensity; ++i) {
      AttackerBurst b;
      b.config_plane = true;
      b.channel = (i % 2) ? kConfigChannelHigh : kConfigChannelLow;
      b.wire = rng_.bytes(6);
      act.bursts.push_back(std::move(b));
    }
  }

  void plan_replay(AttackerAction& act, uint64_t cycle, int sub,
                   uint64_t global_sub) {
    if (captures_.empty()) return;
    // Alternate per cycle between denial (kill every poll so the master hears
    // only the replay, all retries included) and a single barge-in probe.
    bool deny = cycle % 2 == 0;
    if (!deny && sub != 0) return;
    const CapturedFrame& cap = captures_[replay_cursor_++ % captures_.size()];
    int ch = attack_channel(global_sub);
    if (deny) {
      AttackerBurst kill;
      kill.track_id = cap.track_id;
      kill.slot_id = cap.slot_id;
      kill.leg = Direction::Downlink;
      kill.channel = ch;
      kill.wire = rng_.bytes(4);
      act.bursts.push_back(std::move(kill));
    }
    AttackerBurst b;
    b.track_id = cap.track_id;
    b.slot_id = cap.slot_id;
    b.leg = Direction::Uplink;
    b.channel = ch;
    b.wire = cap.wire;
    b.claimed_uid = cap.uid;
    act.bursts.push_back(std::move(b));
  }

  void plan_forgery(AttackerAction& act, uint64_t global_sub, bool with_key) {
    if (!target_mode_.secured() || target_master_ == 0) return;
    auto locit = counters_.find(spec_.target_uid);
    if (locit == counters_.end()) return;
    if (forge_counter_ == 0)
      forge_counter_ = uint64_t(locit->second) +
                       (with_key ? spec_.counter_jump : 1);
    if (forge_counter_ > kCounterMax) return;

    const size_t cap = secured_payload_capacity(target_mode_.tau_bits);
    ControlBits ctrl{Direction::Uplink, 0, false, false};
    Frame f;
    f.kind = SlotKind::DSlot;
    f.mode = target_mode_;
    f.control = ctrl;
    f.counter = uint32_t(forge_counter_);
    if (with_key) {
      Bytes payload(std::min<size_t>(cap, 4), 0xE1);
      auto nonce = link_nonce(target_master_, spec_.target_uid,
                              Direction::Uplink, uint32_t(forge_counter_));
      Bytes aad{encode_control(ctrl)};
      Aes128 aes(keys_.at(spec_.target_uid));
      Bytes sealed = ccm_seal_trunc(aes, nonce.data(), nonce.size(), aad,
                                    payload, target_mode_.tag_bytes());
      size_t tag_len = target_mode_.tag_bytes();
      f.payload.assign(sealed.begin(), sealed.end() - tag_len);
      f.tag.assign(sealed.end() - tag_len, sealed.end());
    } else {
      f.payload = rng_.bytes(std::min<size_t>(cap, 4));
      f.tag = rng_.bytes(target_mode_.tag_bytes());
    }
    ++forge_counter_;
    ++injections;

    int ch = attack_channel(global_sub);
    AttackerBurst kill;
    kill.track_id = target_track_hint();
    kill.slot_id = -2; // filled by the engine from the target's slot
    kill.leg = Direction::Downlink;
    kill.channel = ch;
    kill.wire = rng_.bytes(4);
    act.bursts.push_back(std::move(kill));

    AttackerBurst b;
    b.track_id = target_track_hint();
    b.slot_id = -2;
    b.leg = Direction::Uplink;
    b.channel = ch;
    b.wire = encode_frame(f);
    b.claimed_uid = spec_.target_uid;
    act.bursts.push_back(std::move(b));
  }

  int target_track_hint() const { return spec_.target_track; }

  AttackSpec spec_;
  int attack_id_;
  RngStream rng_;

  bool config_known_ = false;
  std::optional<HoppingTable> table_;
  std::set<uint64_t> known_uids_;
  std::map<uint64_t, uint32_t> counters_;
  std::map<uint64_t, Bytes> keys_;
  std::vector<CapturedFrame> captures_;
  size_t replay_cursor_ = 0;
  uint64_t forge_counter_ = 0;
  uint32_t target_master_ = 0;
  SecurityMode target_mode_{};
  SlotKind target_kind_ = SlotKind::DSlot;
  PrereqReport prereqs_;
};

} // namespace iolw
