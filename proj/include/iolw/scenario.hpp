#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iolw/adversary.hpp"
#include "iolw/cell.hpp"
#include "iolw/detection.hpp"
#include "iolw/medium.hpp"
#include "iolw/pairing.hpp"

namespace iolw {

enum class ActionKind : uint8_t {
  EnterServiceMode,
  ExitServiceMode,
  PairUniqueId,
  PairButton,
  Roam,
  ReturnHome,
  AdaptiveSwitch,
  Reconfigure,
};

inline const char* to_string(ActionKind a) {
  switch (a) {
    case ActionKind::EnterServiceMode: return "enter_service_mode";
    case ActionKind::ExitServiceMode: return "exit_service_mode";
    case ActionKind::PairUniqueId: return "pair_unique_id";
    case ActionKind::PairButton: return "pair_button";
    case ActionKind::Roam: return "roam";
    case ActionKind::ReturnHome: return "return_home";
    case ActionKind::AdaptiveSwitch: return "adaptive_switch";
    case ActionKind::Reconfigure: return "reconfigure";
  }
  return "?";
}

struct ScenarioEvent {
  uint64_t at_cycle = 0;
  ActionKind action = ActionKind::EnterServiceMode;
  uint32_t master_id = 0;
  int track_id = -1;
  int slot_id = -1;
  // pairing
  DeviceConfig device{};
  PairingMethod method = PairingMethod::SecuredOOB;
  // roam / return / reconfigure
  uint64_t device_uid = 0;
  uint32_t to_master = 0;
  int to_track = -1;
  int to_slot = -1;
  uint64_t lease_cycles = 0;
  // adaptive switch
  Blocklist new_blocklist;
};

struct SafetyParams {
  // Valid-exchange watchdog on safety-tagged devices; expiry drops the pair
  // into its safe state until traffic resumes.
  uint64_t watchdog_cycles = 10;
};

struct OutputSpec {
  std::string trace_jsonl;
  std::string summary_csv;
  std::string outcomes_json;
};

struct Scenario {
  std::string id = "scenario";
  CellConfig cell;
  MediumParams medium;
  std::vector<ScenarioEvent> events; // executed in cycle order
  std::vector<AttackSpec> attacks;
  DetectionParams detection;
  SafetyParams safety;
  uint64_t auto_reconfigure_cycles = 0; // 0 = ports stay locked until a
                                        // reconfigure event
  int master_budget_per_subcycle = 12;  // decode attempts per sub-cycle
  std::vector<PortKey> button_ports;
  std::map<uint32_t, std::set<uint64_t>> roaming_allowlists;
  bool oob_available = true;
  uint64_t seed = 1;
  bool seed_explicit = false; // file carried a seed; loses only to --seed
  uint64_t horizon_cycles = 100;
  bool counting_only = false; // aggregates only, for long statistical runs
  OutputSpec outputs;

  void validate() const {
    if (horizon_cycles == 0) throw InvalidScenario("horizon must be >= 1");
    if (master_budget_per_subcycle < 1)
      throw InvalidScenario("master processing budget must be >= 1");
    medium.validate();
    detection.validate();
    for (const auto& a : attacks) a.validate();
    uint64_t prev = 0;
    for (const auto& e : events) {
      if (e.at_cycle < prev)
        throw InvalidScenario("timeline events must be sorted by cycle");
      prev = e.at_cycle;
    }
  }
};

} // namespace iolw
