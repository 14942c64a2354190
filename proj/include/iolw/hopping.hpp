#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iolw/errors.hpp"
#include "iolw/rng.hpp"

namespace iolw {

// 2.4 GHz band: eighty 1 MHz channels, f_n = 2400 + n MHz. Channels 1 and 80
// carry configuration traffic, 2 and 78 are guard channels, 79 is unused, so
// cyclic data hops over {3..77}.
inline constexpr int kChannelMin = 1;
inline constexpr int kChannelMax = 80;
inline constexpr int kUsableLow = 3;
inline constexpr int kUsableHigh = 77;
inline constexpr int kConfigChannelLow = 1;
inline constexpr int kConfigChannelHigh = 80;
inline constexpr int kDefaultMinHopMhz = 24;
inline constexpr size_t kMinUsableChannels = 8;

inline int carrier_frequency_mhz(int n) {
  if (n < kChannelMin || n > kChannelMax)
    throw ChannelOutOfRange("channel index " + std::to_string(n));
  return 2400 + n;
}

class Blocklist {
public:
  Blocklist() = default;

  void add(int channel) {
    if (channel < kChannelMin || channel > kChannelMax)
      throw ChannelOutOfRange("blocklist entry " + std::to_string(channel));
    blocked_.insert(channel);
  }

  void add_range(int lo, int hi) {
    if (lo > hi) std::swap(lo, hi);
    for (int c = lo; c <= hi; ++c) add(c);
  }

  // "17" or an inclusive range "3-25".
  void add_spec(const std::string& spec) {
    auto dash = spec.find('-');
    try {
      if (dash == std::string::npos) {
        add(std::stoi(spec));
      } else {
        add_range(std::stoi(spec.substr(0, dash)),
                  std::stoi(spec.substr(dash + 1)));
      }
    } catch (const std::invalid_argument&) {
      throw ConfigInvalid("bad blocklist entry '" + spec + "'");
    } catch (const std::out_of_range&) {
      throw ConfigInvalid("bad blocklist entry '" + spec + "'");
    }
  }

  bool contains(int channel) const { return blocked_.count(channel) != 0; }
  const std::set<int>& channels() const { return blocked_; }
  bool operator==(const Blocklist&) const = default;

private:
  std::set<int> blocked_;
};

inline std::vector<int> usable_channels(const Blocklist& blocklist) {
  std::vector<int> out;
  for (int c = kUsableLow; c <= kUsableHigh; ++c)
    if (!blocklist.contains(c)) out.push_back(c);
  return out;
}

struct HoppingTable {
  std::vector<int> sequence;
  uint32_t master_id = 0;
  int min_hop_distance_mhz = kDefaultMinHopMhz;
  uint32_t generation = 0;
  Blocklist blocklist;

  bool operator==(const HoppingTable&) const = default;
};

namespace hopdetail {

// One randomized attempt at ordering the channels so every consecutive pair,
// including the wraparound, is at least min_hop apart. Backtracking search;
// branches are tried most-constrained-first (fewest onward options), with the
// seed deciding tie order, which keeps the search fast on dense blocklists
// while distinct seeds still produce distinct sequences. Gives up when the
// step budget runs out.
inline std::optional<std::vector<int>> try_order(const std::vector<int>& ch,
                                                 int min_hop, RngStream& rng,
                                                 size_t budget) {
  const size_t n = ch.size();
  std::vector<std::vector<size_t>> adj(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j && std::abs(ch[i] - ch[j]) >= min_hop) adj[i].push_back(j);

  std::vector<uint64_t> prio(n);
  for (size_t i = 0; i < n; ++i) prio[i] = rng.next();

  std::vector<size_t> path;
  path.reserve(n);
  std::vector<char> used(n, 0);
  size_t steps = 0;
  bool exhausted = false;

  auto onward = [&](size_t v) {
    size_t c = 0;
    for (size_t nb : adj[v])
      if (!used[nb]) ++c;
    return c;
  };

  auto dfs = [&](auto&& self, size_t cur) -> bool {
    if (path.size() == n)
      return std::abs(ch[path.front()] - ch[path.back()]) >= min_hop;
    std::vector<std::pair<uint64_t, size_t>> cands;
    for (size_t nb : adj[cur])
      if (!used[nb]) cands.emplace_back((uint64_t(onward(nb)) << 56) | (prio[nb] >> 8), nb);
    std::sort(cands.begin(), cands.end());
    for (auto [key, nb] : cands) {
      if (++steps > budget) {
        exhausted = true;
        return false;
      }
      used[nb] = 1;
      path.push_back(nb);
      if (self(self, nb)) return true;
      path.pop_back();
      used[nb] = 0;
      if (exhausted) return false;
    }
    return false;
  };

  size_t start = size_t(rng.below(n));
  used[start] = 1;
  path.push_back(start);
  if (!dfs(dfs, start)) return std::nullopt;

  std::vector<int> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = ch[path[i]];
  return out;
}

} // namespace hopdetail

// Deterministic per-master permutation of the usable channels honoring the
// minimum hop distance. Distinct master ids give distinct sequences.
inline HoppingTable generate_table(uint32_t master_id, const Blocklist& blocklist,
                                   int min_hop_distance_mhz = kDefaultMinHopMhz,
                                   uint32_t generation = 0) {
  std::vector<int> ch = usable_channels(blocklist);
  if (ch.size() < kMinUsableChannels)
    throw TooFewChannels(std::to_string(ch.size()) + " usable channels, need " +
                         std::to_string(kMinUsableChannels));

  uint64_t base = uint64_t(master_id) ^ (uint64_t(generation) << 32);
  for (uint64_t restart = 0; restart < 64; ++restart) {
    auto rng = derive_stream(base, "hopping." + std::to_string(restart));
    auto seq = hopdetail::try_order(ch, min_hop_distance_mhz, rng, 200000);
    if (seq) {
      HoppingTable t;
      t.sequence = std::move(*seq);
      t.master_id = master_id;
      t.min_hop_distance_mhz = min_hop_distance_mhz;
      t.generation = generation;
      t.blocklist = blocklist;
      return t;
    }
  }
  throw TooFewChannels("no ordering satisfies hop distance " +
                       std::to_string(min_hop_distance_mhz) + " MHz over " +
                       std::to_string(ch.size()) + " channels");
}

inline int next_channel(const HoppingTable& table, uint64_t sub_cycle_counter) {
  return table.sequence[sub_cycle_counter % table.sequence.size()];
}

// New table for a changed environment; the caller distributes it (sealed in
// Secured mode, plaintext in Legacy mode) and swaps at a cycle boundary.
inline HoppingTable adaptive_switch(const HoppingTable& table,
                                    const Blocklist& new_blocklist) {
  return generate_table(table.master_id, new_blocklist,
                        table.min_hop_distance_mhz, table.generation + 1);
}

// Serialized image of the channel list as sent during table distribution.
// Also the needle for transcript-secrecy checks.
inline Bytes serialize_table(const HoppingTable& table) {
  Bytes out;
  out.push_back(uint8_t(table.sequence.size()));
  for (int c : table.sequence) out.push_back(uint8_t(c));
  return out;
}

} // namespace iolw
