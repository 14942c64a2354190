#pragma once

#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "iolw/advantage.hpp"
#include "iolw/ccm.hpp"
#include "iolw/frame.hpp"
#include "iolw/rng.hpp"
#include "iolw/secure_link.hpp"
#include "iolw/sim.hpp"
#include "iolw/stats.hpp"

namespace iolw {

// ---- forgery monte carlo --------------------------------------------------

struct MonteCarloForgery {
  unsigned tau_bits = 0;
  unsigned attempts_per_episode = 0;
  uint64_t episodes = 0;
  uint64_t successes = 0;
  uint64_t seed = 0;
  double observed = 0.0;
  double theory = 0.0;
  double bound = 0.0; // closed-form upper bound at these parameters
  bool bound_exceeded = false;
  double sigma_distance = 0.0;
  ConfidenceInterval ci99;

  bool passed() const { return sigma_distance <= 3.0 && !bound_exceeded; }
};

namespace mcdetail {

// One chunk of episodes against a real receiving link. A fresh key per chunk
// is enough: the acceptance chance of a uniformly random tag does not depend
// on the key, only on the tag length.
inline uint64_t forgery_chunk(unsigned tau_bits, unsigned attempts,
                              uint64_t episodes, uint64_t seed, int chunk) {
  RngStream rng =
      derive_stream(seed, "mc.chunk." + std::to_string(chunk));
  SecureLink link;
  link.key = rng.bytes(16);
  link.master_id = 1;
  link.device_uid = 1;
  link.tau_bits = tau_bits;
  link.role = LinkRole::Master; // verifies uplink traffic
  Aes128 aes(link.key);

  const size_t cap = secured_payload_capacity(tau_bits);
  const size_t tag_len = tau_bits / 8;
  const Bytes header{encode_control({Direction::Uplink, 0, false, false})};

  uint64_t hits = 0;
  Bytes ct(cap), tag(tag_len);
  for (uint64_t e = 0; e < episodes; ++e) {
    link.state = LinkState::Active;
    link.consecutive_auth_failures = 0;
    link.rx_highwater = 0;
    for (unsigned a = 1; a <= attempts; ++a) {
      rng.fill(ct.data(), ct.size());
      rng.fill(tag.data(), tag.size());
      OpenResult r = open_with(link, aes, a, header, ct, tag);
      if (r.status == OpenStatus::Accepted) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

} // namespace mcdetail

// Empirical forgery success rate over independent locked-port episodes, each
// giving the attacker `attempts` guesses at a real verifier. Work is split
// into 64 independently seeded chunks, so the result does not depend on how
// many threads execute them.
inline MonteCarloForgery monte_carlo_forgery(unsigned tau_bits,
                                             unsigned attempts,
                                             uint64_t episodes, uint64_t seed) {
  SecurityMode::secured_tau(tau_bits); // validates
  if (attempts < 1 || attempts > unsigned(kLockoutThreshold))
    throw InvalidParams("attempts per episode must be 1..3: the port locks");
  if (episodes == 0) throw InvalidParams("need at least one episode");

  constexpr int kChunks = 64;
  std::array<uint64_t, kChunks> hits{};
  std::array<uint64_t, kChunks> todo{};
  for (int c = 0; c < kChunks; ++c)
    todo[size_t(c)] = episodes / kChunks + (uint64_t(c) < episodes % kChunks);

  unsigned workers = std::min<unsigned>(
      std::max(1u, std::thread::hardware_concurrency()), 8u);
  std::atomic<int> next{0};
  auto drain = [&] {
    int c;
    while ((c = next.fetch_add(1)) < kChunks)
      if (todo[size_t(c)])
        hits[size_t(c)] = mcdetail::forgery_chunk(tau_bits, attempts,
                                                  todo[size_t(c)], seed, c);
  };
  if (workers <= 1) {
    drain();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(drain);
    for (auto& t : pool) t.join();
  }

  MonteCarloForgery r;
  r.tau_bits = tau_bits;
  r.attempts_per_episode = attempts;
  r.episodes = episodes;
  r.seed = seed;
  for (uint64_t h : hits) r.successes += h;
  r.observed = double(r.successes) / double(episodes);
  long double per = std::ldexp(1.0L, -int(tau_bits));
  r.theory = double(1.0L - std::pow(1.0L - per, (long double)(attempts)));
  r.bound = double(advantage_bound({tau_bits, 1, 128, attempts}));
  r.bound_exceeded = r.observed > r.bound &&
                     binomial_sigma_distance(r.successes, episodes, r.bound) > 3.0;
  r.sigma_distance = binomial_sigma_distance(r.successes, episodes, r.theory);
  r.ci99 = binomial_ci99(r.successes, episodes);
  return r;
}

// ---- bit error propagation ------------------------------------------------

enum class DiffusionProfile { BitPreserving, BlockDiffusing };

inline const char* to_string(DiffusionProfile p) {
  return p == DiffusionProfile::BitPreserving ? "bit_preserving"
                                              : "block_diffusing";
}

struct BepReport {
  DiffusionProfile profile = DiffusionProfile::BitPreserving;
  uint64_t trials = 0;
  uint64_t seed = 0;
  int block_bits = 128;
  double mean_fraction = 0.0; // changed plaintext bits / block bits
  int min_changed_bits = 0;
  int max_changed_bits = 0;
  bool flipped_bit_maps_to_itself = true; // meaningful for BitPreserving

  bool passed() const {
    if (profile == DiffusionProfile::BitPreserving)
      return flipped_bit_maps_to_itself && min_changed_bits == 1 &&
             max_changed_bits == 1;
    return mean_fraction > 0.48 && mean_fraction < 0.52;
  }
};

// Flip one ciphertext bit, decrypt, count how many plaintext bits moved.
// The counter keystream leaves exactly the flipped bit changed; sending the
// block through the cipher itself spreads the flip over about half the block.
inline BepReport bep_experiment(DiffusionProfile profile, uint64_t trials,
                                uint64_t seed) {
  if (trials == 0) throw InvalidParams("need at least one trial");
  RngStream rng = derive_stream(seed, "bep");
  BepReport rep;
  rep.profile = profile;
  rep.trials = trials;
  rep.seed = seed;
  rep.min_changed_bits = 129;
  rep.max_changed_bits = 0;

  uint64_t changed_total = 0;
  for (uint64_t t = 0; t < trials; ++t) {
    Bytes key = rng.bytes(16);
    Aes128 aes(key);
    uint8_t pt[16], ct[16], back[16];
    rng.fill(pt, 16);
    int flip = int(rng.below(128));

    if (profile == DiffusionProfile::BlockDiffusing) {
      aes.encrypt_block(pt, ct);
      ct[flip / 8] ^= uint8_t(1u << (flip % 8));
      aes.decrypt_block(ct, back);
    } else {
      Bytes nonce = rng.bytes(13);
      uint8_t buf[16];
      for (int i = 0; i < 16; ++i) buf[i] = pt[i];
      ccm_ctr_xor(aes, nonce.data(), nonce.size(), buf, 16); // encrypt
      buf[flip / 8] ^= uint8_t(1u << (flip % 8));
      ccm_ctr_xor(aes, nonce.data(), nonce.size(), buf, 16); // decrypt
      for (int i = 0; i < 16; ++i) back[i] = buf[i];
    }

    int changed = 0;
    bool self = false;
    for (int i = 0; i < 16; ++i) {
      uint8_t d = uint8_t(pt[i] ^ back[i]);
      changed += std::popcount(unsigned(d));
      if (i == flip / 8 && (d >> (flip % 8)) & 1u) self = true;
    }
    changed_total += uint64_t(changed);
    rep.min_changed_bits = std::min(rep.min_changed_bits, changed);
    rep.max_changed_bits = std::max(rep.max_changed_bits, changed);
    if (!(self && changed == 1)) rep.flipped_bit_maps_to_itself = false;
    if (profile == DiffusionProfile::BlockDiffusing)
      rep.flipped_bit_maps_to_itself = false;
  }
  rep.mean_fraction = double(changed_total) / (128.0 * double(trials));
  return rep;
}

// ---- trace classification -------------------------------------------------

struct AttackEvidence {
  uint64_t exchanges_failed_by_attacker = 0;
  uint64_t safe_state_entries = 0;
  uint64_t accepted_from_attacker = 0;
  uint64_t accepted_from_attacker_safety = 0;
  uint64_t exfiltrations = 0;
  uint64_t substitutions = 0;
  uint64_t replays_rejected = 0;
  uint64_t fail_states = 0;
  std::array<uint64_t, 4> alerts{}; // by AlertKind
};

struct AttackOutcome {
  AttackKind kind = AttackKind::Flooding;
  int attack_id = -1;
  bool prerequisites_met = false;
  std::vector<std::string> missing_prerequisites;
  bool availability = false;
  bool integrity = false;
  bool confidentiality = false;
  bool safety_impact = false;
  // An attack "succeeds" when it beats a security objective. Pure denial
  // degrades the link but breaks neither integrity nor confidentiality.
  bool succeeded = false;
  AttackEvidence evidence;

  std::string impact_string() const {
    std::string s;
    if (availability) s += "A";
    if (integrity) s += s.empty() ? "I" : ",I";
    if (confidentiality) s += s.empty() ? "C" : ",C";
    return s;
  }
};

inline std::vector<AttackOutcome> classify_trace(const SimResult& r) {
  std::vector<AttackOutcome> out;
  for (size_t i = 0; i < r.attack_specs.size(); ++i) {
    AttackOutcome o;
    o.kind = r.attack_specs[i].kind;
    o.attack_id = int(i);
    o.prerequisites_met =
        i < r.attack_prereqs.size() && r.attack_prereqs[i].ok;
    if (i < r.attack_prereqs.size())
      o.missing_prerequisites = r.attack_prereqs[i].missing;

    const TraceSink& t = r.trace;
    o.evidence.exchanges_failed_by_attacker = t.exchanges_failed_by_attacker;
    o.evidence.safe_state_entries = t.safe_state_entries;
    o.evidence.accepted_from_attacker = t.accepted_from_attacker;
    o.evidence.accepted_from_attacker_safety = t.accepted_from_attacker_safety;
    o.evidence.exfiltrations = t.exfiltrations;
    o.evidence.substitutions = t.substitutions;
    o.evidence.replays_rejected = t.replays_rejected;
    o.evidence.fail_states = t.fail_states;
    for (size_t k = 0; k < 4; ++k)
      o.evidence.alerts[k] = t.alerts(AlertKind(k));

    o.availability = t.exchanges_failed_by_attacker > 0 ||
                     t.safe_state_entries > 0 || t.substitutions > 0;
    o.integrity = t.accepted_from_attacker > 0;
    o.confidentiality = t.exfiltrations > 0;
    o.safety_impact = t.accepted_from_attacker_safety > 0;
    o.succeeded = o.integrity || o.confidentiality;
    out.push_back(std::move(o));
  }
  return out;
}

// ---- residual failure law -------------------------------------------------

struct ResidualFailure {
  uint64_t cycles = 0;
  uint64_t failed = 0;
  double observed = 0.0;
  double expected = 0.0; // q^3 for per-transmission failure rate q
  double sigma_distance = 0.0;
};

inline ResidualFailure residual_failure(const TraceSink& t, double q) {
  ResidualFailure r;
  r.cycles = t.exchanges_total;
  r.failed = t.exchanges_failed;
  if (r.cycles == 0) throw IncompleteTrace("no exchanges recorded");
  r.observed = double(r.failed) / double(r.cycles);
  r.expected = q * q * q;
  r.sigma_distance = binomial_sigma_distance(r.failed, r.cycles, r.expected);
  return r;
}

} // namespace iolw
