#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>

#include "iolw/cell.hpp"
#include "iolw/errors.hpp"
#include "iolw/trace.hpp"

namespace iolw {

inline constexpr uint64_t kDefaultLeaseCycles = 12000;

struct PortKey {
  uint32_t master_id = 0;
  int track_id = 0;
  int slot_id = 0;
  auto operator<=>(const PortKey&) const = default;
};

enum class PairingPhase : uint8_t { Unpaired, Paired, Roamed };

struct PortState {
  PairingPhase phase = PairingPhase::Unpaired;
  PairingMethod method = PairingMethod::SecuredOOB;
  uint64_t device_uid = 0;
  bool reserved = false; // home port of a currently roamed device
};

struct Lease {
  PortKey home;
  PortKey visited;
  uint64_t remaining = 0;
};

// Tracks which ports hold which devices, service-mode windows, button
// preconfiguration, and roaming leases. Mutates the cell's slot assignments;
// the engine renders the matching on-air traffic.
class PairingRegistry {
public:
  void preconfigure_button_port(PortKey port) { button_ports_.insert(port); }

  void set_allowlist(uint32_t master_id, std::set<uint64_t> uids) {
    allowlists_[master_id] = std::move(uids);
  }

  void set_oob_available(bool v) { oob_available_ = v; }

  bool in_service_mode(uint32_t master_id, int track_id) const {
    return service_mode_.count({master_id, track_id}) != 0;
  }

  bool master_in_service_mode(uint32_t master_id) const {
    for (const auto& [m, t] : service_mode_)
      if (m == master_id) return true;
    return false;
  }

  void enter_service_mode(TraceSink& sink, uint64_t cycle, uint32_t master_id,
                          int track_id) {
    service_mode_.insert({master_id, track_id});
    Event e;
    e.kind = EventKind::ServiceMode;
    e.cycle = cycle;
    e.master_id = master_id;
    e.track_id = track_id;
    e.flag = true;
    sink.emit(e);
  }

  void exit_service_mode(TraceSink& sink, uint64_t cycle, uint32_t master_id,
                         int track_id) {
    service_mode_.erase({master_id, track_id});
    Event e;
    e.kind = EventKind::ServiceMode;
    e.cycle = cycle;
    e.master_id = master_id;
    e.track_id = track_id;
    e.flag = false;
    sink.emit(e);
  }

  // Binds a device to a port by its unique id. Legacy and out-of-band
  // variants differ only in method tag here; what crosses the air is the
  // engine's business.
  void pair_unique_id(Cell& cell, TraceSink& sink, uint64_t cycle, PortKey port,
                      const DeviceConfig& dev, PairingMethod method) {
    if (method == PairingMethod::SecuredOOB && !oob_available_)
      throw OOBUnavailable("out-of-band secret channel unavailable");
    admit(cell, port, dev.device_uid);
    install(cell, sink, cycle, port, dev, method);
  }

  // Button pairing only works on ports set aside for it in advance.
  void pair_button(Cell& cell, TraceSink& sink, uint64_t cycle, PortKey port,
                   const DeviceConfig& dev) {
    if (button_ports_.count(port) == 0)
      throw PortNotPreconfigured("port not preconfigured for button pairing");
    admit(cell, port, dev.device_uid);
    install(cell, sink, cycle, port, dev, PairingMethod::Button);
  }

  // Temporarily re-homes a paired device to another master's port.
  void roam(Cell& cell, TraceSink& sink, uint64_t cycle, uint64_t device_uid,
            PortKey dest, uint64_t lease_cycles) {
    auto loc = device_location_.find(device_uid);
    if (loc == device_location_.end())
      throw ConfigInvalid("device is not paired anywhere");
    if (leases_.count(device_uid))
      throw LeaseActiveElsewhere("device already roamed under an active lease");
    const PortKey home = loc->second;
    auto allow = allowlists_.find(dest.master_id);
    if (allow == allowlists_.end() || allow->second.count(device_uid) == 0)
      throw NotAllowlisted("device not on the visited master's roaming allowlist");
    if (!in_service_mode(home.master_id, home.track_id))
      throw NotInServiceMode("home track not in service mode");
    if (!in_service_mode(dest.master_id, dest.track_id))
      throw NotInServiceMode("visited track not in service mode");
    auto& home_slot = slot_of(cell, home);
    auto& dest_slot = slot_of(cell, dest);
    if (dest_slot.device) throw PortOccupied("destination port already holds a device");
    if (lease_cycles == 0) lease_cycles = kDefaultLeaseCycles;

    DeviceConfig dev = *home_slot.device;
    home_slot.device.reset();
    dest_slot.device = dev;
    ports_[home].phase = PairingPhase::Roamed;
    ports_[home].reserved = true;
    ports_[dest] = PortState{PairingPhase::Paired, PairingMethod::Roaming,
                             device_uid, false};
    device_location_[device_uid] = dest;
    leases_[device_uid] = Lease{home, dest, lease_cycles};

    Event e;
    e.kind = EventKind::Roam;
    e.cycle = cycle;
    e.master_id = dest.master_id;
    e.track_id = dest.track_id;
    e.slot_id = dest.slot_id;
    e.device_uid = device_uid;
    e.flag = true;
    e.value = uint32_t(lease_cycles);
    sink.emit(e);
  }

  void return_home(Cell& cell, TraceSink& sink, uint64_t cycle,
                   uint64_t device_uid) {
    auto it = leases_.find(device_uid);
    if (it == leases_.end())
      throw ConfigInvalid("device has no active roaming lease");
    const Lease lease = it->second;
    auto& home_slot = slot_of(cell, lease.home);
    auto& visited_slot = slot_of(cell, lease.visited);
    DeviceConfig dev = *visited_slot.device;
    visited_slot.device.reset();
    home_slot.device = dev;
    ports_[lease.home].phase = PairingPhase::Paired;
    ports_[lease.home].reserved = false;
    ports_.erase(lease.visited);
    device_location_[device_uid] = lease.home;
    leases_.erase(it);

    Event e;
    e.kind = EventKind::Roam;
    e.cycle = cycle;
    e.master_id = lease.home.master_id;
    e.track_id = lease.home.track_id;
    e.slot_id = lease.home.slot_id;
    e.device_uid = device_uid;
    e.flag = false;
    sink.emit(e);
  }

  // Advances lease clocks by one cycle; expired leases send devices home.
  // Returns the devices that went back so the caller can rewire their links.
  std::vector<uint64_t> tick(Cell& cell, TraceSink& sink, uint64_t cycle) {
    std::vector<uint64_t> expired;
    for (auto& [uid, lease] : leases_)
      if (--lease.remaining == 0) expired.push_back(uid);
    for (uint64_t uid : expired) return_home(cell, sink, cycle, uid);
    return expired;
  }

  // Registers devices that were part of the initial cell build as paired.
  void adopt_existing(const Cell& cell) {
    for (const auto& [tid, track] : cell.tracks)
      for (const auto& slot : track.cfg.slots)
        if (slot.device) {
          PortKey port{track.master_id, tid, slot.slot_id};
          ports_[port] = PortState{PairingPhase::Paired,
                                   PairingMethod::SecuredOOB,
                                   slot.device->device_uid, false};
          device_location_[slot.device->device_uid] = port;
        }
  }

  const std::map<PortKey, PortState>& ports() const { return ports_; }
  const std::map<uint64_t, Lease>& leases() const { return leases_; }
  std::optional<PortKey> location(uint64_t uid) const {
    auto it = device_location_.find(uid);
    if (it == device_location_.end()) return std::nullopt;
    return it->second;
  }

  // A device may sit behind at most one port at a time.
  bool single_pairing_holds(const Cell& cell) const {
    std::set<uint64_t> seen;
    for (const auto& [tid, track] : cell.tracks)
      for (const auto& slot : track.cfg.slots)
        if (slot.device && !seen.insert(slot.device->device_uid).second)
          return false;
    return true;
  }

private:
  static SlotConfig& slot_of(Cell& cell, PortKey port) {
    auto it = cell.tracks.find(port.track_id);
    if (it == cell.tracks.end())
      throw UnknownTrack("track " + std::to_string(port.track_id));
    for (auto& slot : it->second.cfg.slots)
      if (slot.slot_id == port.slot_id) return slot;
    throw ConfigInvalid("slot " + std::to_string(port.slot_id) +
                        " not present on track " + std::to_string(port.track_id));
  }

  void admit(Cell& cell, PortKey port, uint64_t uid) {
    if (!in_service_mode(port.master_id, port.track_id))
      throw NotInServiceMode("track not in service mode");
    auto& slot = slot_of(cell, port);
    if (slot.device) throw PortOccupied("port already holds a device");
    auto ps = ports_.find(port);
    if (ps != ports_.end() && ps->second.reserved)
      throw PortOccupied("port reserved for a roamed device");
    if (device_location_.count(uid))
      throw DuplicateId("device already paired elsewhere");
  }

  void install(Cell& cell, TraceSink& sink, uint64_t cycle, PortKey port,
               const DeviceConfig& dev, PairingMethod method) {
    slot_of(cell, port).device = dev;
    ports_[port] = PortState{PairingPhase::Paired, method, dev.device_uid, false};
    device_location_[dev.device_uid] = port;

    Event e;
    e.kind = EventKind::Pairing;
    e.cycle = cycle;
    e.master_id = port.master_id;
    e.track_id = port.track_id;
    e.slot_id = port.slot_id;
    e.device_uid = dev.device_uid;
    e.method = method;
    e.safety = dev.safety_tagged;
    sink.emit(e);
  }

  std::map<PortKey, PortState> ports_;
  std::map<uint64_t, PortKey> device_location_;
  std::map<uint64_t, Lease> leases_;
  std::set<std::pair<uint32_t, int>> service_mode_;
  std::set<PortKey> button_ports_;
  std::map<uint32_t, std::set<uint64_t>> allowlists_;
  bool oob_available_ = true;
};

} // namespace iolw
