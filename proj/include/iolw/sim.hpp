#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "iolw/adversary.hpp"
#include "iolw/cell.hpp"
#include "iolw/detection.hpp"
#include "iolw/medium.hpp"
#include "iolw/pairing.hpp"
#include "iolw/scenario.hpp"
#include "iolw/schedule.hpp"
#include "iolw/secure_link.hpp"
#include "iolw/trace.hpp"

namespace iolw {

struct SimResult {
  TraceSink trace{TraceSink::Mode::Collecting};
  Cell cell;
  std::vector<AttackSpec> attack_specs;
  std::vector<PrereqReport> attack_prereqs;
  std::vector<uint64_t> attack_injections;
};

namespace simdetail {

struct LinkEnd {
  SecureLink link;
  Aes128 aes;
  explicit LinkEnd(SecureLink l) : link(std::move(l)), aes(link.key) {}
  void rekey(SecureLink l) {
    link = std::move(l);
    aes = Aes128(link.key);
  }
};

struct ActiveSlot {
  int track_id = -1;
  int slot_id = -1;
  uint64_t uid = 0;
  uint32_t master_id = 0;
  SlotKind kind = SlotKind::SSlot;
  SecurityMode mode{};
  bool safety = false;
  bool locked = false;
  bool done = false;     // master stopped retrying
  bool genuine = false;  // the device's own data got through
  int attempts = 0;
  FailCause cause = FailCause::None;
  bool will_respond = false;
  Bytes delivered_poll_payload;
};

struct PendingBurst {
  Actor actor = Actor::Master;
  int track_id = -1;
  int slot_id = -1;
  int slot_index = -1; // into the active-slot table; -1 for attacker extras
  Direction leg = Direction::Downlink;
  int channel = 0;
  bool config_plane = false;
  int attack_id = -1;
  uint64_t uid = 0;
  Bytes wire;
  DeliveryOutcome outcome = DeliveryOutcome::Delivered;
  uint32_t flips = 0;
  bool parse_ok = false;
};

} // namespace simdetail

class Simulation {
public:
  explicit Simulation(Scenario sc) : sc_(std::move(sc)) {
    sc_.validate();
    sink_ = TraceSink(sc_.counting_only ? TraceSink::Mode::Counting
                                        : TraceSink::Mode::Collecting);
    noise_ = derive_stream(sc_.seed, "medium.noise");
  }

  SimResult run() {
    cell_ = build_cell(sc_.cell);
    pairing_.adopt_existing(cell_);
    for (const auto& port : sc_.button_ports)
      pairing_.preconfigure_button_port(port);
    for (const auto& [mid, uids] : sc_.roaming_allowlists)
      pairing_.set_allowlist(mid, uids);
    pairing_.set_oob_available(sc_.oob_available);

    for (const auto& [tid, track] : cell_.tracks)
      for (const auto& slot : track.cfg.slots)
        if (slot.device && slot.device->security_mode.secured()) {
          make_links(track.master_id, *slot.device);
          last_ok_[slot.device->device_uid] = 0;
        }

    for (size_t i = 0; i < sc_.attacks.size(); ++i) {
      attackers_.emplace_back(sc_.attacks[i], int(i), sc_.seed);
      atk_rt_.push_back({});
    }
    if (sc_.detection.sniffer_enabled) sniffer_.emplace(sc_.detection);

    for (cycle_ = 0; cycle_ < sc_.horizon_cycles; ++cycle_) {
      run_timeline();
      auto_reconfigure();
      attacker_admin();
      auto slots = collect_active_slots();
      for (int sub = 0; sub < sc_.cell.timing.sub_cycles_per_cycle; ++sub)
        step_subcycle(slots, sub);
      finish_cycle(slots);
      auto returned = pairing_.tick(cell_, sink_, cycle_);
      for (uint64_t uid : returned) rewire_after_move(uid);
    }

    SimResult r;
    r.trace = std::move(sink_);
    r.cell = std::move(cell_);
    for (auto& a : attackers_) {
      r.attack_specs.push_back(a.spec());
      r.attack_prereqs.push_back(a.prereqs());
      r.attack_injections.push_back(a.injections);
    }
    return r;
  }

private:
  using LinkEnd = simdetail::LinkEnd;
  using ActiveSlot = simdetail::ActiveSlot;
  using PendingBurst = simdetail::PendingBurst;

  struct AtkRuntime {
    bool got_config = false, got_table = false, got_counter = false,
         got_key = false, got_profile = false, announced = false;
  };

  Event base_event(EventKind kind) const {
    Event e;
    e.kind = kind;
    e.cycle = cycle_;
    return e;
  }

  Bytes oob_secret(uint64_t uid) {
    return derive_stream(sc_.seed, "oob.secret." + std::to_string(uid)).bytes(16);
  }

  void make_links(uint32_t master_id, const DeviceConfig& dev) {
    Bytes secret = oob_secret(dev.device_uid);
    unsigned tau = dev.security_mode.tau_bits;
    mlinks_.insert_or_assign(
        dev.device_uid,
        LinkEnd(establish_link(secret, master_id, dev.device_uid, tau,
                               LinkRole::Master)));
    dlinks_.insert_or_assign(
        dev.device_uid,
        LinkEnd(establish_link(secret, master_id, dev.device_uid, tau,
                               LinkRole::Device)));
  }

  // ---- timeline ----------------------------------------------------------

  void run_timeline() {
    while (next_event_ < sc_.events.size() &&
           sc_.events[next_event_].at_cycle == cycle_) {
      dispatch(sc_.events[next_event_]);
      ++next_event_;
    }
  }

  void dispatch(const ScenarioEvent& ev) {
    switch (ev.action) {
      case ActionKind::EnterServiceMode:
        pairing_.enter_service_mode(sink_, cycle_, ev.master_id, ev.track_id);
        break;
      case ActionKind::ExitServiceMode:
        pairing_.exit_service_mode(sink_, cycle_, ev.master_id, ev.track_id);
        break;
      case ActionKind::PairUniqueId: {
        bool secured = ev.device.security_mode.secured();
        if (secured && ev.method == PairingMethod::LegacyUniqueId)
          throw ConfigInvalid("secured device cannot pair over the legacy flow");
        if (!secured && ev.method == PairingMethod::SecuredOOB)
          throw ConfigInvalid("legacy device has no out-of-band secret");
        PortKey port{ev.master_id, ev.track_id, ev.slot_id};
        pairing_.pair_unique_id(cell_, sink_, cycle_, port, ev.device, ev.method);
        after_pairing(port, ev.device);
        break;
      }
      case ActionKind::PairButton: {
        PortKey port{ev.master_id, ev.track_id, ev.slot_id};
        pairing_.pair_button(cell_, sink_, cycle_, port, ev.device);
        after_pairing(port, ev.device);
        break;
      }
      case ActionKind::Roam: {
        PortKey dest{ev.to_master, ev.to_track, ev.to_slot};
        pairing_.roam(cell_, sink_, cycle_, ev.device_uid, dest, ev.lease_cycles);
        rewire_after_move(ev.device_uid);
        break;
      }
      case ActionKind::ReturnHome:
        pairing_.return_home(cell_, sink_, cycle_, ev.device_uid);
        rewire_after_move(ev.device_uid);
        break;
      case ActionKind::AdaptiveSwitch: {
        Track& track = cell_.tracks.at(ev.track_id);
        track.table = adaptive_switch(track.table, ev.new_blocklist);
        Event note = base_event(EventKind::Note);
        note.track_id = ev.track_id;
        note.value = track.table.generation;
        note.note = "adaptive_switch";
        sink_.emit(note);
        for (const auto& slot : track.cfg.slots)
          if (slot.device)
            send_table(track, *slot.device);
        break;
      }
      case ActionKind::Reconfigure:
        reconfigure_port(ev.device_uid);
        break;
    }
  }

  void after_pairing(PortKey port, const DeviceConfig& dev) {
    const Track& track = cell_.track(port.track_id);
    // Address handshake on the configuration channels; the unique id rides
    // in the clear either way.
    Bytes req;
    req.push_back('P'); req.push_back('R'); req.push_back('Q');
    req.resize(15);
    store_be32(req.data() + 3, port.master_id);
    store_be64(req.data() + 7, dev.device_uid);
    Bytes resp;
    resp.push_back('P'); resp.push_back('R'); resp.push_back('S');
    resp.resize(11);
    store_be64(resp.data() + 3, dev.device_uid);
    put_config_on_air(port.master_id, req, true);
    for (auto& atk : attackers_)
      if (atk.spec().physical.proximity && atk.listening(cycle_))
        note_gains(atk, atk.observe_pair_request(dev.device_uid));
    put_config_on_air(port.master_id, resp, true);

    if (dev.security_mode.secured()) {
      make_links(port.master_id, dev);
      last_ok_[dev.device_uid] = cycle_;
    }
    send_table(track, dev);
  }

  // Hopping table distribution: sealed under the link key for secured
  // devices, plain bytes for legacy ones.
  void send_table(const Track& track, const DeviceConfig& dev) {
    Bytes image = serialize_table(track.table);
    Event tt = base_event(EventKind::TableTransfer);
    tt.master_id = track.master_id;
    tt.track_id = track.cfg.track_id;
    tt.device_uid = dev.device_uid;
    if (dev.security_mode.secured()) {
      auto& le = mlinks_.at(dev.device_uid);
      uint32_t seq = ++config_seq_[dev.device_uid];
      std::array<uint8_t, 13> n{};
      store_be32(n.data(), track.master_id);
      store_be32(n.data() + 4, uint32_t(dev.device_uid));
      n[8] = 2; // config plane, outside both link counter spaces
      store_be32(n.data() + 9, seq);
      Bytes aad{'T', 'B'};
      Bytes sealed = ccm_seal(le.aes, n.data(), n.size(), aad, image, 8);
      Bytes msg{'T', 'B', 'S'};
      msg.insert(msg.end(), sealed.begin(), sealed.end());
      tt.flag = true;
      sink_.emit(tt);
      put_config_on_air(track.master_id, msg, true);
    } else {
      Bytes msg{'T', 'B', 'L'};
      msg.insert(msg.end(), image.begin(), image.end());
      tt.flag = false;
      sink_.emit(tt);
      put_config_on_air(track.master_id, msg, true);
      for (auto& atk : attackers_)
        if (atk.spec().physical.proximity && atk.listening(cycle_))
          note_gains(atk, atk.observe_plain_table(track.table));
    }
  }

  void put_config_on_air(uint32_t master_id, const Bytes& msg, bool scheduled) {
    sink_.record_air(msg);
    Event b = base_event(EventKind::Burst);
    b.channel = kConfigChannelLow;
    b.master_id = master_id;
    b.actor = Actor::Master;
    b.value = uint32_t(msg.size());
    sink_.emit(b);
    pending_config_air_.push_back({kConfigChannelLow, true, scheduled});
  }

  void note_gains(const AttackerState& atk,
                  const std::vector<KnowledgeKind>& gains) {
    for (KnowledgeKind k : gains) {
      Event e = base_event(EventKind::Knowledge);
      e.actor = Actor::Attacker;
      e.attack_id = atk.id();
      e.knowledge = k;
      sink_.emit(e);
    }
  }

  // ---- links -------------------------------------------------------------

  void rewire_after_move(uint64_t uid) {
    auto loc = pairing_.location(uid);
    if (!loc) return;
    const Track& track = cell_.track(loc->track_id);
    const DeviceConfig* dev = cell_.device(uid);
    if (!dev) return;
    if (dev->security_mode.secured()) {
      make_links(loc->master_id, *dev);
      last_ok_[uid] = cycle_;
      fail_since_.erase(uid);
      locked_by_attacker_.erase(uid);
    }
    send_table(track, *dev);
  }

  void reconfigure_port(uint64_t uid) {
    auto& ml = mlinks_.at(uid);
    int n = ++reconf_count_[uid];
    Bytes secret =
        derive_stream(sc_.seed, "reconf." + std::to_string(uid) + "." +
                                    std::to_string(n))
            .bytes(16);
    SecureLink fresh = reconfigure(ml.link, secret);
    ml.rekey(std::move(fresh));
    auto& dl = dlinks_.at(uid);
    dl.rekey(establish_link(secret, ml.link.master_id, uid, ml.link.tau_bits,
                            LinkRole::Device));
    fail_since_.erase(uid);
    locked_by_attacker_.erase(uid);
    Event e = base_event(EventKind::Reconfigured);
    e.device_uid = uid;
    e.master_id = ml.link.master_id;
    e.value = uint32_t(n);
    sink_.emit(e);
  }

  void auto_reconfigure() {
    if (sc_.auto_reconfigure_cycles == 0) return;
    std::vector<uint64_t> due;
    for (const auto& [uid, since] : fail_since_)
      if (cycle_ >= since + sc_.auto_reconfigure_cycles) due.push_back(uid);
    for (uint64_t uid : due) reconfigure_port(uid);
  }

  // ---- attacker bookkeeping ---------------------------------------------

  void attacker_admin() {
    for (size_t i = 0; i < attackers_.size(); ++i) {
      auto& atk = attackers_[i];
      auto& rt = atk_rt_[i];
      const AttackSpec& spec = atk.spec();
      if (cycle_ >= atk.first_activity_cycle()) materialize(atk, rt);
      if (cycle_ == spec.start_cycle && !rt.announced) {
        rt.announced = true;
        PrereqReport r = atk.check_prerequisites();
        atk.set_prereqs(r);
        Event e = base_event(EventKind::Note);
        e.actor = Actor::Attacker;
        e.attack_id = atk.id();
        if (r.ok) {
          e.note = std::string("attack_start ") + to_string(spec.kind);
        } else {
          std::string miss;
          for (const auto& m : r.missing) {
            if (!miss.empty()) miss += ", ";
            miss += m;
          }
          e.note = std::string("prerequisite_unmet ") + to_string(spec.kind) +
                   ": " + miss;
        }
        sink_.emit(e);
      }
    }
  }

  int resolve_target_track(const AttackSpec& spec) const {
    if (spec.target_uid != 0) {
      if (auto loc = cell_.locate(spec.target_uid)) return loc->first;
    }
    if (spec.target_track >= 0) return spec.target_track;
    return cell_.tracks.empty() ? -1 : cell_.tracks.begin()->first;
  }

  void materialize(AttackerState& atk, AtkRuntime& rt) {
    const AttackSpec& spec = atk.spec();
    if (spec.grants.iolw_config && !rt.got_config) {
      atk.grant_config();
      rt.got_config = true;
    }
    if (spec.grants.hopping_table && !rt.got_table) {
      int tid = resolve_target_track(spec);
      if (tid >= 0 && cell_.tracks.count(tid)) {
        atk.grant_table(cell_.track(tid).table);
        rt.got_table = true;
      }
    }
    if (spec.grants.counter_value && !rt.got_counter && spec.target_uid) {
      auto it = dlinks_.find(spec.target_uid);
      if (it != dlinks_.end()) {
        atk.grant_counter(spec.target_uid, uint32_t(it->second.link.tx_counter));
        rt.got_counter = true;
      }
    }
    if (spec.grants.leaked_key && !rt.got_key && spec.target_uid) {
      auto it = mlinks_.find(spec.target_uid);
      if (it != mlinks_.end()) {
        atk.grant_key(spec.target_uid, it->second.link.key);
        rt.got_key = true;
      }
    }
    if (!rt.got_profile && spec.target_uid) {
      if (auto loc = cell_.locate(spec.target_uid)) {
        const DeviceConfig* dev = cell_.device(spec.target_uid);
        atk.learn_target_profile(cell_.track(loc->first).master_id, *dev);
        rt.got_profile = true;
      }
    }
  }

  // ---- per-cycle machinery ----------------------------------------------

  std::vector<ActiveSlot> collect_active_slots() {
    std::vector<ActiveSlot> slots;
    for (const auto& [tid, track] : cell_.tracks)
      for (const auto& slot : track.cfg.slots) {
        if (!slot.device) continue;
        ActiveSlot s;
        s.track_id = tid;
        s.slot_id = slot.slot_id;
        s.uid = slot.device->device_uid;
        s.master_id = track.master_id;
        s.kind = slot.device->slot_kind;
        s.mode = slot.device->security_mode;
        s.safety = slot.device->safety_tagged;
        if (s.mode.secured()) {
          s.locked = mlinks_.at(s.uid).link.state == LinkState::FailState ||
                     dlinks_.at(s.uid).link.state == LinkState::FailState;
        }
        slots.push_back(std::move(s));
      }
    return slots;
  }

  bool any_service_mode() const {
    for (const auto& [tid, track] : cell_.tracks)
      if (pairing_.in_service_mode(track.master_id, tid)) return true;
    return false;
  }

  int nominal_bursts_per_subcycle() const {
    int paired = 0;
    for (const auto& [tid, track] : cell_.tracks)
      for (const auto& slot : track.cfg.slots)
        if (slot.device) ++paired;
    return 2 * paired;
  }

  Bytes build_poll_wire(ActiveSlot& s, bool service) {
    ControlBits ctrl{Direction::Downlink, uint8_t(s.attempts), service, false};
    Frame f;
    f.kind = s.kind;
    f.mode = s.mode;
    f.control = ctrl;
    if (s.mode.secured()) {
      size_t cap = std::min<size_t>(secured_payload_capacity(s.mode.tau_bits), 4);
      Bytes payload(4);
      store_be32(payload.data(), uint32_t(cycle_));
      payload.resize(cap);
      auto& le = mlinks_.at(s.uid);
      Bytes header{encode_control(ctrl)};
      SealResult sr = seal(le.link, header, payload);
      f.counter = sr.counter;
      f.payload = sr.ciphertext;
      f.tag = sr.tag;
      return encode_frame(f);
    }
    f.payload = Bytes{uint8_t(cycle_ & 0xFF)};
    return append_fcs(encode_frame(f));
  }

  Bytes genuine_uplink_payload(const ActiveSlot& s) const {
    if (s.mode.secured()) {
      size_t cap = std::min<size_t>(secured_payload_capacity(s.mode.tau_bits), 4);
      Bytes payload(4);
      store_be32(payload.data(), uint32_t(s.uid) ^ uint32_t(cycle_));
      payload.resize(cap);
      return payload;
    }
    if (s.kind == SlotKind::SSlot) return Bytes{uint8_t((s.uid ^ cycle_) & 0xFF)};
    return Bytes{uint8_t((s.uid ^ cycle_) & 0xFF), uint8_t(cycle_ >> 8)};
  }

  Bytes build_response_wire(ActiveSlot& s, int attempt_index, const Bytes& payload,
                            bool service) {
    ControlBits ctrl{Direction::Uplink, uint8_t(attempt_index), service, false};
    Frame f;
    f.kind = s.kind;
    f.mode = s.mode;
    f.control = ctrl;
    if (s.mode.secured()) {
      auto& le = dlinks_.at(s.uid);
      Bytes header{encode_control(ctrl)};
      SealResult sr = seal(le.link, header, payload);
      f.counter = sr.counter;
      f.payload = sr.ciphertext;
      f.tag = sr.tag;
      return encode_frame(f);
    }
    f.payload = payload;
    return append_fcs(encode_frame(f));
  }

  void emit_burst_event(const PendingBurst& b, int sub) {
    Event e = base_event(EventKind::Burst);
    e.sub_cycle = sub;
    e.track_id = b.track_id;
    e.slot_id = b.slot_id;
    e.channel = b.channel;
    e.direction = b.leg;
    e.actor = b.actor;
    e.device_uid = b.uid;
    e.attack_id = b.attack_id;
    e.outcome = b.outcome;
    e.value = b.flips;
    sink_.emit(e);
  }

  void emit_security_event(const ActiveSlot& s, const PendingBurst& b, int sub,
                           OpenStatus status, uint32_t counter, Actor at_end) {
    Event e = base_event(EventKind::Security);
    e.sub_cycle = sub;
    e.track_id = s.track_id;
    e.slot_id = s.slot_id;
    e.device_uid = s.uid;
    e.master_id = s.master_id;
    e.direction = b.leg;
    e.actor = b.actor;
    e.attack_id = b.attack_id;
    e.open_status = status;
    e.counter = counter;
    e.safety = s.safety;
    e.flag = at_end == Actor::Master;
    sink_.emit(e);
  }

  void emit_alerts(const std::vector<Alert>& alerts, int sub) {
    for (const Alert& a : alerts) {
      Event e = base_event(EventKind::Alert);
      e.sub_cycle = sub;
      e.alert = a.kind;
      e.channel = a.channel;
      e.device_uid = a.device_uid;
      e.actor = Actor::Sniffer;
      if (a.kind == AlertKind::Replay || a.kind == AlertKind::FailStateCommand)
        e.actor = Actor::Master;
      sink_.emit(e);
    }
  }

  void note_fail_state(const ActiveSlot& s, Actor blame) {
    if (fail_since_.count(s.uid)) return;
    fail_since_[s.uid] = cycle_;
    if (blame == Actor::Attacker) locked_by_attacker_.insert(s.uid);
    Event e = base_event(EventKind::FailState);
    e.device_uid = s.uid;
    e.master_id = s.master_id;
    e.track_id = s.track_id;
    e.slot_id = s.slot_id;
    sink_.emit(e);
  }

  void step_subcycle(std::vector<ActiveSlot>& slots, int sub) {
    const uint64_t global = global_sub_cycle(sc_.cell.timing, cycle_, sub);
    current_global_ = global;
    const bool tx_window = sub < TimingModel::kMaxTransmissionsPerCycle;
    const bool pairing_mode = any_service_mode();

    // Jam coverage for this sub-cycle.
    bool jam_all = false;
    std::set<int> jam_set;
    if (sc_.medium.jam && sc_.medium.jam->active(cycle_)) {
      if (sc_.medium.jam->all_channels) jam_all = true;
      else jam_set.insert(sc_.medium.jam->channels.begin(),
                          sc_.medium.jam->channels.end());
    }

    std::vector<PendingBurst> dl, ul, cfg;

    // Slot index lookup for attacker bursts aimed at a (track, slot).
    std::map<std::pair<int, int>, int> slot_index;
    for (size_t i = 0; i < slots.size(); ++i)
      slot_index[{slots[i].track_id, slots[i].slot_id}] = int(i);

    for (auto& atk : attackers_) {
      if (!atk.attacking(cycle_)) continue;
      AttackerAction act = atk.plan(cell_, cycle_, sub, global, pairing_mode);
      if (act.jam_all) jam_all = true;
      jam_set.insert(act.jam_channels.begin(), act.jam_channels.end());
      for (auto& ab : act.bursts) {
        PendingBurst b;
        b.actor = Actor::Attacker;
        b.attack_id = atk.id();
        b.config_plane = ab.config_plane;
        b.leg = ab.leg;
        b.channel = ab.channel;
        b.wire = std::move(ab.wire);
        b.uid = ab.claimed_uid;
        if (!b.config_plane) {
          int tid = ab.track_id, sid = ab.slot_id;
          if (sid == -2) { // aim at the target device's current port
            auto loc = cell_.locate(atk.spec().target_uid);
            if (!loc) continue;
            tid = loc->first;
            sid = loc->second;
          }
          b.track_id = tid;
          b.slot_id = sid;
          auto idx = slot_index.find({tid, sid});
          b.slot_index = idx == slot_index.end() ? -1 : idx->second;
        }
        (b.config_plane ? cfg : (b.leg == Direction::Downlink ? dl : ul))
            .push_back(std::move(b));
      }
    }

    // Master polls.
    std::map<std::pair<int, int>, int> polled; // (channel, slot_id) -> slot idx
    if (tx_window) {
      for (size_t i = 0; i < slots.size(); ++i) {
        ActiveSlot& s = slots[i];
        if (s.done || s.locked || s.attempts >= TimingModel::kMaxTransmissionsPerCycle)
          continue;
        const Track& track = cell_.track(s.track_id);
        int channel = next_channel(track.table, global);
        bool service = pairing_.in_service_mode(s.master_id, s.track_id);
        PendingBurst b;
        b.actor = Actor::Master;
        b.track_id = s.track_id;
        b.slot_id = s.slot_id;
        b.slot_index = int(i);
        b.leg = Direction::Downlink;
        b.channel = channel;
        b.uid = s.uid;
        b.wire = build_poll_wire(s, service);
        ++s.attempts;
        polled[{channel, s.slot_id}] = int(i);
        dl.push_back(std::move(b));
      }
    }

    auto jammed = [&](int ch) { return jam_all || jam_set.count(ch) != 0; };

    resolve_leg(dl, slots, sub, global, jammed, Direction::Downlink, polled);

    // Device responses enter the uplink leg of the same window.
    for (size_t i = 0; i < slots.size(); ++i) {
      ActiveSlot& s = slots[i];
      if (!s.will_respond) continue;
      s.will_respond = false;
      Bytes payload = genuine_uplink_payload(s);
      Actor actor = Actor::Device;
      for (auto& atk : attackers_) {
        if (auto sub_payload = atk.substitute_uplink(cycle_, s.uid,
                                                     payload.size())) {
          exfiltrate(atk, s, payload);
          payload = std::move(*sub_payload);
          actor = Actor::Attacker;
          Event ev = base_event(EventKind::Substitution);
          ev.sub_cycle = sub;
          ev.device_uid = s.uid;
          ev.attack_id = atk.id();
          ev.track_id = s.track_id;
          ev.slot_id = s.slot_id;
          sink_.emit(ev);
          break;
        }
      }
      const Track& track = cell_.track(s.track_id);
      bool service = pairing_.in_service_mode(s.master_id, s.track_id);
      PendingBurst b;
      b.actor = actor;
      b.track_id = s.track_id;
      b.slot_id = s.slot_id;
      b.slot_index = int(i);
      b.leg = Direction::Uplink;
      b.channel = next_channel(track.table, global);
      b.uid = s.uid;
      b.wire = build_response_wire(s, s.attempts - 1, payload, service);
      ul.push_back(std::move(b));
    }

    // Config-plane processing drains master budget ahead of slot data.
    std::map<uint32_t, int> budget;
    for (const auto& [tid, track] : cell_.tracks)
      budget.emplace(track.master_id, sc_.master_budget_per_subcycle);
    for (auto& b : cfg) {
      if (jammed(b.channel)) {
        b.outcome = DeliveryOutcome::Jammed;
      } else {
        bool heard = false;
        for (auto& [mid, left] : budget)
          if (pairing_.master_in_service_mode(mid)) {
            heard = true;
            if (left > 0) --left;
          }
        b.outcome = heard ? DeliveryOutcome::Delivered
                          : DeliveryOutcome::NoListener;
        b.parse_ok = heard;
      }
      sink_.record_air(b.wire);
      emit_burst_event(b, sub);
    }

    resolve_leg(ul, slots, sub, global, jammed, Direction::Uplink, polled,
                &budget);

    if (sniffer_) {
      SubcycleAir air;
      assemble_air(air, dl, ul, cfg, polled, jam_all, jam_set);
      emit_alerts(sniffer_->observe(air, nominal_bursts_per_subcycle()), sub);
    }
    pending_config_air_.clear();
  }

  template <typename JamFn>
  void resolve_leg(std::vector<PendingBurst>& list,
                   std::vector<ActiveSlot>& slots, int sub, uint64_t global,
                   JamFn jammed, Direction leg,
                   const std::map<std::pair<int, int>, int>& polled,
                   std::map<uint32_t, int>* budget = nullptr) {
    std::map<std::pair<int, int>, std::vector<size_t>> windows;
    for (size_t i = 0; i < list.size(); ++i)
      windows[{list[i].channel, list[i].slot_id}].push_back(i);

    for (auto& [key, members] : windows) {
      const auto [channel, slot_id] = key;
      bool attacker_present = false;
      for (size_t i : members)
        if (list[i].actor == Actor::Attacker) attacker_present = true;

      if (jammed(channel)) {
        for (size_t i : members) {
          list[i].outcome = DeliveryOutcome::Jammed;
          fail_slot(list[i], slots, FailCause::Jammed);
        }
      } else if (members.size() > 1) {
        for (size_t i : members) {
          list[i].outcome = DeliveryOutcome::Collided;
          fail_slot(list[i], slots,
                    attacker_present ? FailCause::AttackerCollision
                                     : FailCause::Collision);
        }
      } else {
        deliver(list[members[0]], slots, sub, leg, polled, budget);
      }
    }

    for (auto& b : list) {
      sink_.record_air(b.wire);
      emit_burst_event(b, sub);
      observe_for_attackers(b, global);
    }
  }

  void fail_slot(const PendingBurst& b, std::vector<ActiveSlot>& slots,
                 FailCause cause) {
    if (b.slot_index < 0 || b.actor == Actor::Attacker) return;
    ActiveSlot& s = slots[size_t(b.slot_index)];
    if (!s.done) s.cause = cause;
  }

  void deliver(PendingBurst& b, std::vector<ActiveSlot>& slots, int sub,
               Direction leg, const std::map<std::pair<int, int>, int>& polled,
               std::map<uint32_t, int>* budget) {
    b.outcome = DeliveryOutcome::Delivered;
    Bytes rx = b.wire;
    bool noisy = sc_.medium.bit_error_rate > 0.0 &&
                 (sc_.medium.noise_scope == NoiseScope::Both ||
                  (sc_.medium.noise_scope == NoiseScope::Uplink &&
                   leg == Direction::Uplink) ||
                  (sc_.medium.noise_scope == NoiseScope::Downlink &&
                   leg == Direction::Downlink));
    if (noisy) b.flips = apply_bit_noise(noise_, rx, sc_.medium.bit_error_rate);

    if (leg == Direction::Downlink) {
      // Listener: the paired device of the matching slot on the track that
      // currently hops on this channel.
      int idx = -1;
      auto it = std::find_if(slots.begin(), slots.end(), [&](const ActiveSlot& s) {
        return s.track_id == b.track_id && s.slot_id == b.slot_id &&
               next_channel(cell_.track(s.track_id).table,
                            current_global_) == b.channel;
      });
      if (it != slots.end()) idx = int(it - slots.begin());
      if (idx < 0) {
        b.outcome = DeliveryOutcome::NoListener;
        return;
      }
      device_receive(slots[size_t(idx)], b, sub, rx);
      return;
    }

    // Uplink: the master listens only where it polled this sub-cycle.
    auto it = polled.find({b.channel, b.slot_id});
    if (it == polled.end()) {
      b.outcome = DeliveryOutcome::NoListener;
      return;
    }
    ActiveSlot& s = slots[size_t(it->second)];
    if (budget) {
      auto& left = (*budget)[s.master_id];
      if (left <= 0) {
        b.outcome = DeliveryOutcome::Dropped;
        if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::MasterBusy;
        return;
      }
      --left;
    }
    master_receive(s, b, sub, rx);
  }

  void device_receive(ActiveSlot& s, PendingBurst& b, int sub, const Bytes& rx) {
    if (!s.mode.secured()) {
      auto body = strip_fcs(rx);
      if (!body) {
        b.parse_ok = false;
        if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::Noise;
        return;
      }
      try {
        Frame f = decode_frame(s.kind, s.mode, *body);
        if (f.control.direction != Direction::Downlink)
          throw MalformedFrame("direction");
        b.parse_ok = true;
        s.will_respond = true;
        s.delivered_poll_payload = f.payload;
      } catch (const Error&) {
        b.parse_ok = false;
        if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::Noise;
      }
      return;
    }

    Frame f;
    try {
      f = decode_frame(s.kind, s.mode, rx);
    } catch (const Error&) {
      b.parse_ok = false;
      if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::Noise;
      return;
    }
    b.parse_ok = true;
    if (f.control.direction != Direction::Downlink) return;
    auto& le = dlinks_.at(s.uid);
    Bytes header{encode_control(f.control)};
    OpenResult r = open_with(le.link, le.aes, f.counter, header, f.payload, f.tag);
    emit_security_event(s, b, sub, r.status, f.counter, Actor::Device);
    switch (r.status) {
      case OpenStatus::Accepted:
        s.will_respond = true;
        s.delivered_poll_payload = std::move(r.payload);
        break;
      case OpenStatus::AuthFailure:
        if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::AuthFail;
        if (le.link.state == LinkState::FailState)
          note_fail_state(s, b.actor);
        break;
      case OpenStatus::ReplayRejected:
        if (b.actor != Actor::Attacker && !s.done)
          s.cause = FailCause::Displaced;
        break;
      case OpenStatus::LinkInFailState:
        if (!s.done) s.cause = FailCause::PortLocked;
        break;
    }
  }

  void master_receive(ActiveSlot& s, PendingBurst& b, int sub, const Bytes& rx) {
    if (!s.mode.secured()) {
      auto body = strip_fcs(rx);
      if (!body) {
        b.parse_ok = false;
        if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::Noise;
        return;
      }
      try {
        Frame f = decode_frame(s.kind, s.mode, *body);
        if (f.control.direction != Direction::Uplink)
          throw MalformedFrame("direction");
        b.parse_ok = true;
        finish_exchange(s, b.actor);
      } catch (const Error&) {
        b.parse_ok = false;
        if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::Noise;
      }
      return;
    }

    Frame f;
    try {
      f = decode_frame(s.kind, s.mode, rx);
    } catch (const Error&) {
      b.parse_ok = false;
      if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::Noise;
      return;
    }
    b.parse_ok = true;
    if (f.control.direction != Direction::Uplink) return;
    auto& le = mlinks_.at(s.uid);
    Bytes header{encode_control(f.control)};
    OpenResult r = open_with(le.link, le.aes, f.counter, header, f.payload, f.tag);
    emit_security_event(s, b, sub, r.status, f.counter, Actor::Master);
    emit_alerts(anomaly_.on_open(s.uid, r.status), sub);
    switch (r.status) {
      case OpenStatus::Accepted:
        finish_exchange(s, b.actor);
        break;
      case OpenStatus::AuthFailure:
        if (b.actor != Actor::Attacker && !s.done) s.cause = FailCause::AuthFail;
        if (le.link.state == LinkState::FailState) note_fail_state(s, b.actor);
        break;
      case OpenStatus::ReplayRejected:
        if (b.actor != Actor::Attacker && !s.done)
          s.cause = FailCause::Displaced;
        break;
      case OpenStatus::LinkInFailState:
        break;
    }
  }

  void finish_exchange(ActiveSlot& s, Actor origin) {
    s.done = true;
    if (origin == Actor::Attacker) {
      s.genuine = false;
      s.cause = FailCause::Displaced;
    } else {
      s.genuine = true;
      s.cause = FailCause::None;
    }
  }

  void exfiltrate(const AttackerState& atk, const ActiveSlot& s,
                  const Bytes& genuine_payload) {
    Event e = base_event(EventKind::Exfiltration);
    e.actor = Actor::Attacker;
    e.attack_id = atk.id();
    e.device_uid = s.uid;
    e.value = uint32_t(genuine_payload.size() + s.delivered_poll_payload.size());
    sink_.emit(e);
    if (!exfil_knowledge_noted_) {
      exfil_knowledge_noted_ = true;
      Event k = base_event(EventKind::Knowledge);
      k.actor = Actor::Attacker;
      k.attack_id = atk.id();
      k.knowledge = KnowledgeKind::PayloadPlaintext;
      sink_.emit(k);
    }
  }

  void observe_for_attackers(const PendingBurst& b, uint64_t global) {
    if (b.actor == Actor::Attacker || b.config_plane) return;
    if (b.outcome == DeliveryOutcome::Collided ||
        b.outcome == DeliveryOutcome::Jammed)
      return; // unreadable off the air too
    for (auto& atk : attackers_) {
      if (!atk.spec().physical.proximity || !atk.listening(cycle_)) continue;
      note_gains(atk, atk.observe_data_burst(
                          cell_, b.track_id, b.slot_id, b.leg, b.channel, global,
                          b.wire, b.uid, burst_mode(b)));
    }
  }

  SecurityMode burst_mode(const PendingBurst& b) const {
    const DeviceConfig* dev = cell_.device(b.uid);
    return dev ? dev->security_mode : SecurityMode::legacy();
  }

  void assemble_air(SubcycleAir& air, const std::vector<PendingBurst>& dl,
                    const std::vector<PendingBurst>& ul,
                    const std::vector<PendingBurst>& cfg,
                    const std::map<std::pair<int, int>, int>& polled,
                    bool jam_all, const std::set<int>& jam_set) {
    std::set<int> energy;
    std::map<int, bool> channel_decodable;

    auto add_list = [&](const std::vector<PendingBurst>& list) {
      // The schedule explains one burst per polled window on each leg.
      // Anything beyond that, or in a window nobody polled, is unexplained.
      std::map<std::pair<int, int>, int> quota;
      for (const auto& b : list) {
        auto key = std::make_pair(b.channel, b.slot_id);
        if (quota.find(key) == quota.end())
          quota[key] = polled.count(key) ? 1 : 0;
      }
      // Legitimate bursts claim the quota first.
      std::vector<const PendingBurst*> order;
      for (const auto& b : list)
        if (b.actor != Actor::Attacker) order.push_back(&b);
      for (const auto& b : list)
        if (b.actor == Actor::Attacker) order.push_back(&b);
      for (const PendingBurst* b : order) {
        bool matches = false;
        auto& q = quota[{b->channel, b->slot_id}];
        if (q > 0) {
          --q;
          matches = true;
        }
        air.bursts.push_back({b->channel, b->config_plane, matches});
        energy.insert(b->channel);
        bool dec = b->outcome == DeliveryOutcome::Delivered && b->parse_ok;
        auto [it, fresh] = channel_decodable.try_emplace(b->channel, dec);
        if (!fresh) it->second = it->second || dec;
      }
    };
    add_list(dl);
    add_list(ul);
    for (const auto& b : cfg) {
      air.bursts.push_back({b.channel, true, b.actor != Actor::Attacker});
      energy.insert(b.channel);
      bool dec = b.outcome == DeliveryOutcome::Delivered && b.parse_ok;
      auto [it, fresh] = channel_decodable.try_emplace(b.channel, dec);
      if (!fresh) it->second = it->second || dec;
    }
    for (const auto& sb : pending_config_air_) {
      air.bursts.push_back(sb);
      energy.insert(sb.channel);
      channel_decodable.try_emplace(sb.channel, true);
    }

    if (jam_all) {
      for (int c = kChannelMin; c <= kChannelMax; ++c) energy.insert(c);
    }
    for (int c : jam_set) energy.insert(c);

    for (int c : energy) {
      air.energy_channels.push_back(c);
      bool jammed_here = jam_all || jam_set.count(c) != 0;
      auto it = channel_decodable.find(c);
      bool decodable = !jammed_here && it != channel_decodable.end() && it->second;
      if (!decodable) air.undecodable_channels.push_back(c);
    }
  }

  void finish_cycle(std::vector<ActiveSlot>& slots) {
    for (ActiveSlot& s : slots) {
      if (s.locked && s.attempts == 0) {
        s.cause = locked_by_attacker_.count(s.uid) ? FailCause::Displaced
                                                   : FailCause::PortLocked;
      }
      Event e = base_event(EventKind::Exchange);
      e.track_id = s.track_id;
      e.slot_id = s.slot_id;
      e.device_uid = s.uid;
      e.master_id = s.master_id;
      e.flag = s.genuine;
      e.cause = s.genuine ? FailCause::None : s.cause;
      e.value = uint32_t(s.attempts);
      e.safety = s.safety;
      sink_.emit(e);

      // The watchdog sees what the master sees: an exchange that verified
      // counts, even if the payload actually came from an attacker.
      if (s.safety) {
        auto& last = last_ok_[s.uid];
        if (s.done) {
          last = cycle_;
          if (safe_.erase(s.uid)) {
            Event sv = base_event(EventKind::SafeState);
            sv.device_uid = s.uid;
            sv.flag = false;
            sink_.emit(sv);
          }
        } else if (cycle_ >= last + sc_.safety.watchdog_cycles &&
                   !safe_.count(s.uid)) {
          safe_.insert(s.uid);
          Event sv = base_event(EventKind::SafeState);
          sv.device_uid = s.uid;
          sv.flag = true;
          sv.value = uint32_t(cycle_ - last);
          sink_.emit(sv);
        }
      } else if (s.done) {
        last_ok_[s.uid] = cycle_;
      }
    }
  }

  Scenario sc_;
  Cell cell_;
  TraceSink sink_{TraceSink::Mode::Collecting};
  PairingRegistry pairing_;
  std::map<uint64_t, LinkEnd> mlinks_, dlinks_;
  std::map<uint64_t, uint64_t> fail_since_;
  std::set<uint64_t> locked_by_attacker_;
  std::map<uint64_t, uint64_t> last_ok_;
  std::set<uint64_t> safe_;
  std::map<uint64_t, int> reconf_count_;
  std::map<uint64_t, uint32_t> config_seq_;
  std::vector<AttackerState> attackers_;
  std::vector<AtkRuntime> atk_rt_;
  std::optional<Sniffer> sniffer_;
  MasterAnomaly anomaly_;
  RngStream noise_{0};
  std::vector<SniffedBurst> pending_config_air_;
  size_t next_event_ = 0;
  uint64_t cycle_ = 0;
  uint64_t current_global_ = 0;
  bool exfil_knowledge_noted_ = false;
};

inline SimResult simulate(Scenario sc) { return Simulation(std::move(sc)).run(); }

} // namespace iolw
