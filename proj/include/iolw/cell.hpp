#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iolw/errors.hpp"
#include "iolw/frame.hpp"
#include "iolw/hopping.hpp"

namespace iolw {

// Timing grid: 5 ms cycles of at least three 1.664 ms sub-cycles; one initial
// transmission and up to two repetitions per cycle.
struct TimingModel {
  int sub_cycles_per_cycle = 3;
  static constexpr int kMaxTransmissionsPerCycle = 3;
  static constexpr double kCycleMs = 5.0;
  static constexpr double kSubCycleMs = 1.664;

  void validate() const {
    if (sub_cycles_per_cycle < 3)
      throw ConfigInvalid("sub_cycles_per_cycle must be >= 3");
  }

  uint64_t cycle_of(uint64_t sub_cycle_counter) const {
    return sub_cycle_counter / uint64_t(sub_cycles_per_cycle);
  }

  bool operator==(const TimingModel&) const = default;
};

struct DeviceConfig {
  uint64_t device_uid = 0;
  SlotKind slot_kind = SlotKind::SSlot;
  SecurityMode security_mode;
  bool safety_tagged = false;

  bool operator==(const DeviceConfig&) const = default;
};

struct SlotConfig {
  int slot_id = 0; // grid position 0..7 within the track
  std::optional<DeviceConfig> device;

  bool operator==(const SlotConfig&) const = default;
};

struct TrackConfig {
  int track_id = 0;
  std::vector<SlotConfig> slots;
  uint64_t hopping_seed = 0; // 0: derive from track_id
  Blocklist blocklist;

  bool operator==(const TrackConfig&) const = default;
};

struct MasterConfig {
  uint32_t master_id = 0;
  std::vector<TrackConfig> tracks;

  bool operator==(const MasterConfig&) const = default;
};

struct CellConfig {
  std::vector<MasterConfig> masters;
  TimingModel timing;
  int min_hop_distance_mhz = kDefaultMinHopMhz;

  bool operator==(const CellConfig&) const = default;
};

inline constexpr size_t kMaxMasters = 3;
inline constexpr size_t kMaxTracksPerMaster = 5;
inline constexpr size_t kMaxSlotsPerTrack = 8;
inline constexpr size_t kMaxSlotUnits = 120; // SSlot = 1 unit, DSlot = 2

inline size_t slot_units(SlotKind k) { return k == SlotKind::DSlot ? 2 : 1; }

struct Track {
  uint32_t master_id = 0;
  TrackConfig cfg;
  HoppingTable table;
};

// Validated topology with generated hopping tables. Tracks are addressable by
// their cell-wide unique track_id.
struct Cell {
  CellConfig cfg;
  std::map<int, Track> tracks; // by track_id

  const Track& track(int track_id) const {
    auto it = tracks.find(track_id);
    if (it == tracks.end())
      throw UnknownTrack("track " + std::to_string(track_id));
    return it->second;
  }

  Track& track(int track_id) {
    return const_cast<Track&>(std::as_const(*this).track(track_id));
  }

  const DeviceConfig* device(uint64_t device_uid) const {
    for (const auto& [tid, t] : tracks)
      for (const auto& s : t.cfg.slots)
        if (s.device && s.device->device_uid == device_uid)
          return &*s.device;
    return nullptr;
  }

  // track and slot a device is bound to
  std::optional<std::pair<int, int>> locate(uint64_t device_uid) const {
    for (const auto& [tid, t] : tracks)
      for (const auto& s : t.cfg.slots)
        if (s.device && s.device->device_uid == device_uid)
          return std::make_pair(tid, s.slot_id);
    return std::nullopt;
  }
};

// Per-track hopping seed: distinct masters must hop differently (the id is
// the seed input); distinct tracks of one master must also land on different
// channels, so the track seed is folded in.
inline uint32_t track_table_seed(uint32_t master_id, const TrackConfig& t) {
  uint64_t mix = t.hopping_seed != 0 ? t.hopping_seed : uint64_t(t.track_id) + 1;
  return master_id ^ uint32_t(splitmix64(mix));
}

inline Cell build_cell(const CellConfig& cfg) {
  cfg.timing.validate();
  if (cfg.masters.empty() || cfg.masters.size() > kMaxMasters)
    throw CapacityExceeded("masters count " + std::to_string(cfg.masters.size()));

  std::set<uint32_t> master_ids;
  std::set<uint64_t> device_uids;
  std::set<int> track_ids;
  size_t units = 0;

  Cell cell;
  cell.cfg = cfg;
  for (const auto& m : cfg.masters) {
    if (!master_ids.insert(m.master_id).second)
      throw DuplicateId("master_id " + std::to_string(m.master_id));
    if (m.tracks.empty() || m.tracks.size() > kMaxTracksPerMaster)
      throw CapacityExceeded("tracks for master " + std::to_string(m.master_id));
    for (const auto& t : m.tracks) {
      if (!track_ids.insert(t.track_id).second)
        throw DuplicateId("track_id " + std::to_string(t.track_id));
      if (t.slots.empty() || t.slots.size() > kMaxSlotsPerTrack)
        throw CapacityExceeded("slots in track " + std::to_string(t.track_id));
      std::set<int> slot_ids;
      for (const auto& s : t.slots) {
        if (s.slot_id < 0 || size_t(s.slot_id) >= kMaxSlotsPerTrack)
          throw ConfigInvalid("slot_id " + std::to_string(s.slot_id));
        if (!slot_ids.insert(s.slot_id).second)
          throw DuplicateId("slot_id " + std::to_string(s.slot_id) +
                            " in track " + std::to_string(t.track_id));
        if (s.device) {
          if (!device_uids.insert(s.device->device_uid).second)
            throw DuplicateId("device_uid " +
                              std::to_string(s.device->device_uid));
          if (s.device->security_mode.secured() &&
              s.device->slot_kind == SlotKind::SSlot)
            throw ConfigInvalid("secured SSlot device " +
                                std::to_string(s.device->device_uid) +
                                ": tag does not fit");
          units += slot_units(s.device->slot_kind);
        }
      }
      Track track;
      track.master_id = m.master_id;
      track.cfg = t;
      track.table = generate_table(track_table_seed(m.master_id, t),
                                   t.blocklist, cfg.min_hop_distance_mhz);
      cell.tracks.emplace(t.track_id, std::move(track));
    }
  }
  if (units > kMaxSlotUnits)
    throw CapacityExceeded(std::to_string(units) + " slot units > " +
                           std::to_string(kMaxSlotUnits));
  return cell;
}

} // namespace iolw
