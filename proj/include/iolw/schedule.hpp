#pragma once

#include <set>
#include <vector>

#include "iolw/cell.hpp"

namespace iolw {

// One polling opportunity: the master addresses a slot in a sub-cycle on the
// track's current channel; the device answers in the same window. Downlink is
// the initiating leg.
struct TransmissionGrant {
  uint64_t cycle_index = 0;
  int sub_cycle_index = 0;
  int track_id = 0;
  int slot_id = 0;
  Direction direction = Direction::Downlink;
  int channel_index = 0;
  uint32_t master_id = 0;
  uint64_t device_uid = 0;

  bool operator==(const TransmissionGrant&) const = default;
};

inline uint64_t global_sub_cycle(const TimingModel& timing, uint64_t cycle,
                                 int sub) {
  return cycle * uint64_t(timing.sub_cycles_per_cycle) + uint64_t(sub);
}

// Grants for one sub-cycle, skipping slots that already completed their
// exchange this cycle. The channel continues the hop sequence across cycle
// boundaries.
inline std::vector<TransmissionGrant> subcycle_grants(
    const Cell& cell, const Track& track, uint64_t cycle, int sub,
    const std::set<int>& skip_slots) {
  std::vector<TransmissionGrant> out;
  if (sub >= TimingModel::kMaxTransmissionsPerCycle) return out;
  int channel = next_channel(
      track.table, global_sub_cycle(cell.cfg.timing, cycle, sub));
  for (const auto& s : track.cfg.slots) {
    if (!s.device || skip_slots.count(s.slot_id)) continue;
    TransmissionGrant g;
    g.cycle_index = cycle;
    g.sub_cycle_index = sub;
    g.track_id = track.cfg.track_id;
    g.slot_id = s.slot_id;
    g.direction = Direction::Downlink;
    g.channel_index = channel;
    g.master_id = track.master_id;
    g.device_uid = s.device->device_uid;
    out.push_back(g);
  }
  return out;
}

// Full static schedule of one cycle: every paired slot gets its initial
// opportunity plus the two repetition opportunities.
inline std::vector<TransmissionGrant> schedule_cycle(const Cell& cell,
                                                     int track_id,
                                                     uint64_t cycle_index) {
  const Track& track = cell.track(track_id);
  std::vector<TransmissionGrant> out;
  for (int sub = 0; sub < cell.cfg.timing.sub_cycles_per_cycle; ++sub) {
    auto g = subcycle_grants(cell, track, cycle_index, sub, {});
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

// Schedule with per-sub-cycle completion feedback: succeeded_by_sub[s] holds
// the slots whose exchange succeeded in sub-cycle s; they drop out of later
// sub-cycles.
inline std::vector<TransmissionGrant> schedule_cycle_with(
    const Cell& cell, int track_id, uint64_t cycle_index,
    const std::vector<std::set<int>>& succeeded_by_sub) {
  const Track& track = cell.track(track_id);
  std::vector<TransmissionGrant> out;
  std::set<int> done;
  for (int sub = 0; sub < cell.cfg.timing.sub_cycles_per_cycle; ++sub) {
    auto g = subcycle_grants(cell, track, cycle_index, sub, done);
    out.insert(out.end(), g.begin(), g.end());
    if (size_t(sub) < succeeded_by_sub.size())
      done.insert(succeeded_by_sub[sub].begin(), succeeded_by_sub[sub].end());
  }
  return out;
}

} // namespace iolw
