#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "iolw/bytes.hpp"
#include "iolw/frame.hpp"
#include "iolw/secure_link.hpp"

namespace iolw {

enum class Actor : uint8_t { System, Master, Device, Attacker, Sniffer };

inline const char* to_string(Actor a) {
  switch (a) {
    case Actor::System: return "system";
    case Actor::Master: return "master";
    case Actor::Device: return "device";
    case Actor::Attacker: return "attacker";
    case Actor::Sniffer: return "sniffer";
  }
  return "?";
}

enum class DeliveryOutcome : uint8_t {
  Delivered,
  Collided,
  Jammed,
  NoListener,
  Dropped, // receiver out of processing budget
};

inline const char* to_string(DeliveryOutcome o) {
  switch (o) {
    case DeliveryOutcome::Delivered: return "delivered";
    case DeliveryOutcome::Collided: return "collided";
    case DeliveryOutcome::Jammed: return "jammed";
    case DeliveryOutcome::NoListener: return "no_listener";
    case DeliveryOutcome::Dropped: return "dropped";
  }
  return "?";
}

// Why an exchange attempt (or a whole cycle) did not complete.
enum class FailCause : uint8_t {
  None,
  Noise,
  Collision,
  AttackerCollision,
  Jammed,
  MasterBusy,
  AuthFail,
  PortLocked,
  Displaced,
};

inline const char* to_string(FailCause c) {
  switch (c) {
    case FailCause::None: return "none";
    case FailCause::Noise: return "noise";
    case FailCause::Collision: return "collision";
    case FailCause::AttackerCollision: return "attacker_collision";
    case FailCause::Jammed: return "jammed";
    case FailCause::MasterBusy: return "master_busy";
    case FailCause::AuthFail: return "auth_fail";
    case FailCause::PortLocked: return "port_locked";
    case FailCause::Displaced: return "displaced";
  }
  return "?";
}

inline bool attacker_caused(FailCause c) {
  return c == FailCause::AttackerCollision || c == FailCause::Jammed ||
         c == FailCause::MasterBusy || c == FailCause::Displaced;
}

enum class AlertKind : uint8_t { Flooding, Jamming, Replay, FailStateCommand };

inline const char* to_string(AlertKind a) {
  switch (a) {
    case AlertKind::Flooding: return "flooding";
    case AlertKind::Jamming: return "jamming";
    case AlertKind::Replay: return "replay";
    case AlertKind::FailStateCommand: return "fail_state_command";
  }
  return "?";
}

enum class PairingMethod : uint8_t { LegacyUniqueId, SecuredOOB, Button, Roaming };

inline const char* to_string(PairingMethod m) {
  switch (m) {
    case PairingMethod::LegacyUniqueId: return "legacy_unique_id";
    case PairingMethod::SecuredOOB: return "secured_oob";
    case PairingMethod::Button: return "button";
    case PairingMethod::Roaming: return "roaming";
  }
  return "?";
}

enum class KnowledgeKind : uint8_t {
  DeviceUid,
  HoppingTable,
  IolwConfig,
  CounterValue,
  LeakedKey,
  PayloadPlaintext,
};

inline const char* to_string(KnowledgeKind k) {
  switch (k) {
    case KnowledgeKind::DeviceUid: return "device_uid";
    case KnowledgeKind::HoppingTable: return "hopping_table";
    case KnowledgeKind::IolwConfig: return "iolw_config";
    case KnowledgeKind::CounterValue: return "counter_value";
    case KnowledgeKind::LeakedKey: return "leaked_key";
    case KnowledgeKind::PayloadPlaintext: return "payload_plaintext";
  }
  return "?";
}

enum class EventKind : uint8_t {
  Burst,         // one on-air transmission and its delivery outcome
  Exchange,      // per-cycle per-slot result
  Security,      // open() verdict at a receiving endpoint
  FailState,     // port entered fail state
  Reconfigured,  // port re-established after fail state
  SafeState,     // safety peer entered/left safe state
  ServiceMode,   // track service mode on/off
  Pairing,       // pairing completed
  TableTransfer, // hopping table distributed (sealed or plaintext)
  Roam,          // roaming transfer / return
  Alert,         // detection alert
  Knowledge,     // attacker knowledge gained
  Exfiltration,  // payload plaintext leaving through a compromised device
  Substitution,  // captive device sent attacker data in place of its own
  Note,          // free-form marker (attack start/stop, prereq failures)
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Burst: return "burst";
    case EventKind::Exchange: return "exchange";
    case EventKind::Security: return "security";
    case EventKind::FailState: return "fail_state";
    case EventKind::Reconfigured: return "reconfigured";
    case EventKind::SafeState: return "safe_state";
    case EventKind::ServiceMode: return "service_mode";
    case EventKind::Pairing: return "pairing";
    case EventKind::TableTransfer: return "table_transfer";
    case EventKind::Roam: return "roam";
    case EventKind::Alert: return "alert";
    case EventKind::Knowledge: return "knowledge";
    case EventKind::Exfiltration: return "exfiltration";
    case EventKind::Substitution: return "substitution";
    case EventKind::Note: return "note";
  }
  return "?";
}

struct Event {
  EventKind kind = EventKind::Note;
  uint64_t cycle = 0;
  int sub_cycle = -1;
  int track_id = -1;
  int slot_id = -1;
  int channel = -1;
  Direction direction = Direction::Downlink;
  Actor actor = Actor::System;
  uint64_t device_uid = 0;
  uint32_t master_id = 0;
  int attack_id = -1;

  // kind-specific payload
  DeliveryOutcome outcome = DeliveryOutcome::Delivered;
  FailCause cause = FailCause::None;
  OpenStatus open_status = OpenStatus::Accepted;
  AlertKind alert = AlertKind::Flooding;
  PairingMethod method = PairingMethod::SecuredOOB;
  KnowledgeKind knowledge = KnowledgeKind::DeviceUid;
  bool flag = false;    // exchange ok / safe-state on / transfer sealed / ...
  bool safety = false;  // device is safety-tagged
  uint32_t counter = 0;
  uint32_t value = 0;   // attempts, bit flips, sizes
  std::string note;
};

// Receives every simulation event. Aggregates are always maintained; the
// full event list and the on-air transcript only in Collecting mode, which
// keeps million-cycle statistical runs flat in memory.
class TraceSink {
public:
  enum class Mode { Collecting, Counting };

  explicit TraceSink(Mode mode = Mode::Collecting) : mode_(mode) {}

  void emit(const Event& e) {
    counts_[size_t(e.kind)]++;
    switch (e.kind) {
      case EventKind::Exchange:
        ++exchanges_total;
        if (!e.flag) {
          ++exchanges_failed;
          if (attacker_caused(e.cause)) ++exchanges_failed_by_attacker;
        }
        break;
      case EventKind::Security:
        switch (e.open_status) {
          case OpenStatus::Accepted:
            if (e.actor == Actor::Attacker) {
              ++accepted_from_attacker;
              if (e.safety) ++accepted_from_attacker_safety;
            }
            break;
          case OpenStatus::AuthFailure: ++auth_failures; break;
          case OpenStatus::ReplayRejected: ++replays_rejected; break;
          case OpenStatus::LinkInFailState: break;
        }
        break;
      case EventKind::FailState: ++fail_states; break;
      case EventKind::SafeState:
        if (e.flag) {
          ++safe_state_entries;
          if (first_safe_state_cycle == UINT64_MAX)
            first_safe_state_cycle = e.cycle;
        }
        break;
      case EventKind::Alert: {
        ++alert_counts[size_t(e.alert)];
        auto& first = first_alert_cycle[size_t(e.alert)];
        if (first == UINT64_MAX) first = e.cycle;
        break;
      }
      case EventKind::Exfiltration: ++exfiltrations; break;
      case EventKind::Substitution: ++substitutions; break;
      case EventKind::Burst:
        if (e.actor == Actor::Attacker) ++attacker_bursts;
        break;
      default: break;
    }
    if (mode_ == Mode::Collecting) events_.push_back(e);
  }

  // Raw bytes as they crossed the medium, for secrecy checks.
  void record_air(const Bytes& wire) {
    if (mode_ == Mode::Collecting)
      transcript_.insert(transcript_.end(), wire.begin(), wire.end());
  }

  Mode mode() const { return mode_; }
  const std::vector<Event>& events() const { return events_; }
  const Bytes& transcript() const { return transcript_; }
  uint64_t count(EventKind k) const { return counts_[size_t(k)]; }
  uint64_t alerts(AlertKind a) const { return alert_counts[size_t(a)]; }
  uint64_t first_alert(AlertKind a) const {
    return first_alert_cycle[size_t(a)];
  }

  uint64_t exchanges_total = 0;
  uint64_t exchanges_failed = 0;
  uint64_t exchanges_failed_by_attacker = 0;
  uint64_t accepted_from_attacker = 0;
  uint64_t accepted_from_attacker_safety = 0;
  uint64_t auth_failures = 0;
  uint64_t replays_rejected = 0;
  uint64_t fail_states = 0;
  uint64_t safe_state_entries = 0;
  uint64_t first_safe_state_cycle = UINT64_MAX;
  uint64_t exfiltrations = 0;
  uint64_t substitutions = 0;
  uint64_t attacker_bursts = 0;

private:
  Mode mode_;
  std::vector<Event> events_;
  Bytes transcript_;
  std::array<uint64_t, 16> counts_{};
  std::array<uint64_t, 4> alert_counts{};
  std::array<uint64_t, 4> first_alert_cycle{UINT64_MAX, UINT64_MAX, UINT64_MAX,
                                            UINT64_MAX};
};

} // namespace iolw
