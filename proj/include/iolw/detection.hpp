#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "iolw/cell.hpp"
#include "iolw/errors.hpp"
#include "iolw/trace.hpp"

namespace iolw {

struct DetectionParams {
  bool sniffer_enabled = true;
  bool sniffer_knows_tables = true;
  double flood_rate_factor = 3.0;
  int flood_window_subcycles = 30;
  int flood_burst_floor = 8; // unexpected bursts per window
  int jam_window_subcycles = 9;

  void validate() const {
    if (flood_rate_factor <= 1.0)
      throw InvalidParams("flood rate factor must exceed 1");
    if (flood_window_subcycles < 1 || flood_burst_floor < 1 ||
        jam_window_subcycles < 1)
      throw InvalidParams("detection windows must be >= 1");
  }
};

// What the sniffer can tell about one sub-cycle. One entry per burst it
// could tune to, plus the set of channels that carried RF energy.
struct SniffedBurst {
  int channel = 0;
  bool config_plane = false;
  bool matches_schedule = false; // lines up with a grant or a live pairing op
};

struct SubcycleAir {
  std::vector<SniffedBurst> bursts;
  std::vector<int> energy_channels;        // any RF presence, jammers included
  std::vector<int> undecodable_channels;   // energy but nothing parseable
};

struct Alert {
  AlertKind kind = AlertKind::Flooding;
  int channel = -1;
  uint64_t device_uid = 0;
};

// Passive monitor. Observes the air, never transmits, so its presence
// cannot change any exchange outcome.
class Sniffer {
public:
  explicit Sniffer(DetectionParams p) : p_(p) { p_.validate(); }

  // nominal = scheduled legitimate bursts per sub-cycle (poll + response per
  // active slot), recomputed by the caller as pairings change
  std::vector<Alert> observe(const SubcycleAir& air, int nominal_per_subcycle) {
    std::vector<Alert> alerts;

    int total = 0, unexpected = 0;
    for (const auto& b : air.bursts) {
      if (!p_.sniffer_knows_tables && !b.config_plane)
        continue; // can't tune to hopping traffic without the tables
      ++total;
      if (!b.matches_schedule) ++unexpected;
    }
    window_total_.push_back(total);
    window_unexpected_.push_back(unexpected);
    running_total_ += total;
    running_unexpected_ += unexpected;
    if (int(window_total_.size()) > p_.flood_window_subcycles) {
      running_total_ -= window_total_.front();
      running_unexpected_ -= window_unexpected_.front();
      window_total_.pop_front();
      window_unexpected_.pop_front();
    }
    const double allowed = p_.flood_rate_factor * nominal_per_subcycle *
                           double(window_total_.size());
    if (running_total_ > allowed || running_unexpected_ >= p_.flood_burst_floor) {
      alerts.push_back({AlertKind::Flooding, -1, 0});
      reset_flood_window();
    }

    // Sustained energy with nothing decodable marks a jammer; legitimate
    // traffic hops away, so clean runs never hold a channel that long.
    std::array<bool, kChannelMax + 1> energy{}, undecodable{};
    for (int c : air.energy_channels) energy[size_t(c)] = true;
    for (int c : air.undecodable_channels) undecodable[size_t(c)] = true;
    for (int c = kChannelMin; c <= kChannelMax; ++c) {
      auto& run = energy_run_[size_t(c)];
      run = (energy[size_t(c)] && undecodable[size_t(c)]) ? run + 1 : 0;
      if (run >= p_.jam_window_subcycles) {
        alerts.push_back({AlertKind::Jamming, c, 0});
        energy_run_.fill(0);
        break;
      }
    }
    return alerts;
  }

private:
  void reset_flood_window() {
    window_total_.clear();
    window_unexpected_.clear();
    running_total_ = 0;
    running_unexpected_ = 0;
  }

  DetectionParams p_;
  std::deque<int> window_total_, window_unexpected_;
  int running_total_ = 0, running_unexpected_ = 0;
  std::array<int, kChannelMax + 1> energy_run_{};
};

// Master-side anomaly mirror: repeats the per-port lockout count from the
// verdict stream and raises the matching alerts.
class MasterAnomaly {
public:
  std::vector<Alert> on_open(uint64_t device_uid, OpenStatus status) {
    std::vector<Alert> alerts;
    auto& streak = streaks_[device_uid];
    switch (status) {
      case OpenStatus::AuthFailure:
        if (++streak == kLockoutThreshold) {
          alerts.push_back({AlertKind::FailStateCommand, -1, device_uid});
          streak = 0;
        }
        break;
      case OpenStatus::ReplayRejected:
        alerts.push_back({AlertKind::Replay, -1, device_uid});
        break;
      case OpenStatus::Accepted:
        streak = 0;
        break;
      case OpenStatus::LinkInFailState:
        break;
    }
    return alerts;
  }

private:
  std::map<uint64_t, int> streaks_;
};

} // namespace iolw
