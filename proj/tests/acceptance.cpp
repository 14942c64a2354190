// End-to-end acceptance gate. Each numbered criterion prints exactly one
// PASS/FAIL line; the process exits nonzero if any failed. Criteria that
// concern the command-line surface spawn the real binary.
//
//   usage: acceptance <path-to-iolwsim> <path-to-scenario-dir>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iolw/analysis.hpp"
#include "iolw/scenario_json.hpp"
#include "iolw/sim.hpp"

using namespace iolw;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_scenarios;
fs::path g_tmp;
int g_failures = 0;

void verdict(int criterion, bool ok, const std::string& what) {
  std::printf("%s  criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
              what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

int run_cli(const std::string& args) {
  std::string cmd = g_cli + " " + args;
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool within_rel(long double value, long double reference, long double tol) {
  return std::fabs(value - reference) <= tol * std::fabs(reference);
}

// ---- 1: closed-form advantage values --------------------------------------

bool criterion_advantage() {
  bool ok = true;
  ok &= within_rel(advantage_bound({32, 1, 128, 3}), 7e-10L, 0.05L);
  ok &= within_rel(advantage_bound({64, 1, 128, 3}), 1.6e-19L, 0.05L);
  ok &= within_rel(advantage_bound({16, 1, 128, 3}), 4.6e-5L, 0.05L);
  ok &= within_rel(advantage_bound({32, 10, 128, 3}), 7e-10L, 0.05L);
  // the ten-query figure was published as 7e-9; the formula gives 2.33e-9,
  // and the toolkit must stand by the recomputation and flag the mismatch
  long double ten = advantage_bound({32, 1, 128, 10});
  ok &= within_rel(ten, 2.3283064e-9L, 0.001L);
  ok &= !within_rel(ten, 7e-9L, 0.05L);

  fs::path out = g_tmp / "advantage_table.json";
  int rc = run_cli("advantage --table --json > " + out.string());
  ok &= rc == 0;
  auto j = nlohmann::json::parse(slurp(out), nullptr, false);
  bool flagged = false;
  if (!j.is_discarded() && j.contains("table"))
    for (const auto& row : j["table"])
      if (row.value("q_dec", 0) == 10 && row.value("consistent", true) == false)
        flagged = true;
  ok &= flagged;
  return ok;
}

// ---- 2: FIPS verdicts ------------------------------------------------------

bool criterion_fips() {
  FipsVerdict v32 = fips_check({32, 1, 128, 3});
  FipsVerdict v24 = fips_check({24, 1, 128, 3});
  FipsVerdict v16 = fips_check({16, 1, 128, 3});
  bool ok = true;
  ok &= v32.per_attempt_ok && v32.per_minute_ok;
  ok &= v24.per_attempt_ok;
  ok &= within_rel(v24.bound, 1.8e-7L, 0.05L);
  ok &= !v16.per_minute_ok && !v16.per_attempt_ok;
  return ok;
}

// ---- 3: monte carlo vs the forgery law ------------------------------------

bool criterion_monte_carlo() {
  auto t0 = std::chrono::steady_clock::now();
  auto r8 = monte_carlo_forgery(8, 3, 1000000, 20260822);
  auto r16 = monte_carlo_forgery(16, 3, 10000000, 20260823);
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                  .count();
  bool ok = true;
  ok &= within_rel(r8.theory, 1.17e-2L, 0.01L);
  ok &= r8.sigma_distance <= 3.0;
  ok &= within_rel(r16.theory, 4.58e-5L, 0.01L);
  ok &= r16.sigma_distance <= 3.0;
  ok &= !r8.bound_exceeded && !r16.bound_exceeded;
  ok &= secs < 120.0;
  return ok;
}

// ---- 4: canonical scenario classification via --check ----------------------

bool criterion_table_regression() {
  static const char* names[] = {"flooding",       "jamming",    "replay",
                                "forgery",        "forgery_leaked",
                                "compromised"};
  bool ok = true;
  for (const char* n : names) {
    fs::path sc = g_scenarios / (std::string(n) + ".json");
    fs::path ex = g_scenarios / (std::string(n) + ".expected.json");
    int rc = run_cli("simulate " + sc.string() + " --check " + ex.string() +
                     " > " + (g_tmp / "check.out").string());
    if (rc != 0) {
      std::fprintf(stderr, "  scenario %s: exit %d\n", n, rc);
      ok = false;
    }
  }
  return ok;
}

// ---- 5: residual failure follows q^3 ---------------------------------------

bool criterion_residual() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (double q : {0.05, 0.1}) {
    Scenario sc;
    MasterConfig m;
    m.master_id = 1;
    TrackConfig t;
    t.track_id = 0;
    SlotConfig s;
    s.slot_id = 0;
    DeviceConfig d;
    d.device_uid = 7;
    s.device = d;
    t.slots = {s};
    m.tracks = {t};
    sc.cell.masters = {m};
    sc.medium.bit_error_rate = MediumParams::rate_for_burst_failure(q, 24);
    sc.medium.noise_scope = NoiseScope::Uplink;
    sc.horizon_cycles = 1000000;
    sc.counting_only = true;
    sc.detection.sniffer_enabled = false;
    sc.seed = 9000 + uint64_t(q * 100);
    auto r = simulate(sc);
    auto rf = residual_failure(r.trace, q);
    if (rf.sigma_distance > 3.0) {
      std::fprintf(stderr, "  q=%.2f observed %.3g expected %.3g (%.2f sigma)\n",
                   q, rf.observed, rf.expected, rf.sigma_distance);
      ok = false;
    }
  }
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                  .count();
  ok &= secs < 60.0;
  return ok;
}

// ---- 6: bit error propagation ----------------------------------------------

bool criterion_bep() {
  auto diff = bep_experiment(DiffusionProfile::BlockDiffusing, 10000, 5);
  auto pres = bep_experiment(DiffusionProfile::BitPreserving, 10000, 5);
  bool ok = true;
  ok &= std::fabs(diff.mean_fraction - 0.5) <= 0.02;
  ok &= pres.flipped_bit_maps_to_itself;
  ok &= pres.min_changed_bits == 1 && pres.max_changed_bits == 1;
  return ok;
}

// ---- 7: security invariants ------------------------------------------------

bool invariant_replay_rejection() {
  Bytes secret(16, 0x42);
  SecureLink tx = establish_link(secret, 1, 99, 32, LinkRole::Device);
  SecureLink rx = establish_link(secret, 1, 99, 32, LinkRole::Master);
  Bytes header{encode_control({Direction::Uplink, 0, false, false})};
  auto sealed = seal(tx, header, Bytes{1, 2, 3});
  if (open(rx, sealed.counter, header, sealed.ciphertext, sealed.tag).status !=
      OpenStatus::Accepted)
    return false;
  for (int i = 0; i < 100000; ++i)
    if (open(rx, sealed.counter, header, sealed.ciphertext, sealed.tag)
            .status == OpenStatus::Accepted)
      return false;
  return rx.state == LinkState::Active; // replays never trip the lockout
}

bool invariant_lockout() {
  Bytes secret(16, 0x43);
  SecureLink tx = establish_link(secret, 1, 99, 32, LinkRole::Device);
  SecureLink rx = establish_link(secret, 1, 99, 32, LinkRole::Master);
  Bytes header{encode_control({Direction::Uplink, 0, false, false})};
  Bytes bad_tag(4, 0xEE);

  // two failures, then a valid frame: the streak must reset
  auto s1 = seal(tx, header, Bytes{9});
  for (int i = 0; i < 2; ++i)
    if (open(rx, s1.counter + 50 + i, header, s1.ciphertext, bad_tag).status !=
        OpenStatus::AuthFailure)
      return false;
  if (rx.state != LinkState::Active) return false;
  if (open(rx, s1.counter, header, s1.ciphertext, s1.tag).status !=
      OpenStatus::Accepted)
    return false;

  // exactly three consecutive failures flip the state
  auto s2 = seal(tx, header, Bytes{8});
  for (int i = 0; i < 2; ++i) {
    if (open(rx, s2.counter + 60 + i, header, s2.ciphertext, bad_tag).status !=
        OpenStatus::AuthFailure)
      return false;
    if (rx.state != LinkState::Active) return false;
  }
  if (open(rx, s2.counter + 62, header, s2.ciphertext, bad_tag).status !=
      OpenStatus::AuthFailure)
    return false;
  if (rx.state != LinkState::FailState) return false;

  // nothing gets through a locked link, not even genuine traffic
  if (open(rx, s2.counter, header, s2.ciphertext, s2.tag).status !=
      OpenStatus::LinkInFailState)
    return false;
  auto s3 = seal(tx, header, Bytes{7});
  return open(rx, s3.counter, header, s3.ciphertext, s3.tag).status ==
         OpenStatus::LinkInFailState;
}

bool contains(const Bytes& haystack, const Bytes& needle) {
  return std::search(haystack.begin(), haystack.end(), needle.begin(),
                     needle.end()) != haystack.end();
}

Scenario pairing_scenario(bool secured) {
  Scenario sc;
  MasterConfig m;
  m.master_id = 1;
  TrackConfig t;
  t.track_id = 0;
  SlotConfig s;
  s.slot_id = 0;
  t.slots = {s};
  m.tracks = {t};
  sc.cell.masters = {m};
  sc.horizon_cycles = 30;
  sc.seed = 5;
  ScenarioEvent enter;
  enter.at_cycle = 2;
  enter.action = ActionKind::EnterServiceMode;
  enter.master_id = 1;
  enter.track_id = 0;
  ScenarioEvent pair;
  pair.at_cycle = 3;
  pair.action = ActionKind::PairUniqueId;
  pair.master_id = 1;
  pair.track_id = 0;
  pair.slot_id = 0;
  DeviceConfig d;
  d.device_uid = 0x77;
  d.slot_kind = secured ? SlotKind::DSlot : SlotKind::SSlot;
  d.security_mode =
      secured ? SecurityMode::secured_tau(32) : SecurityMode::legacy();
  pair.device = d;
  pair.method =
      secured ? PairingMethod::SecuredOOB : PairingMethod::LegacyUniqueId;
  sc.events = {enter, pair};
  return sc;
}

bool invariant_oob_secrecy() {
  auto legacy = simulate(pairing_scenario(false));
  Bytes legacy_image = serialize_table(legacy.cell.track(0).table);
  if (!contains(legacy.trace.transcript(), legacy_image)) return false;

  auto sec = simulate(pairing_scenario(true));
  Bytes image = serialize_table(sec.cell.track(0).table);
  if (contains(sec.trace.transcript(), image)) return false;
  Bytes secret =
      derive_stream(5, "oob.secret." + std::to_string(0x77)).bytes(16);
  if (contains(sec.trace.transcript(), secret)) return false;
  return sec.trace.exchanges_total > 0 && sec.trace.exchanges_failed == 0;
}

bool invariant_hopping() {
  auto rng = derive_stream(424242, "acceptance.hopping");
  for (int i = 0; i < 1000; ++i) {
    Blocklist bl;
    int blocked = 0;
    for (int c = kUsableLow; c <= kUsableHigh && blocked < 28; ++c)
      if (rng.unit() < 0.15) {
        bl.add(c);
        ++blocked;
      }
    HoppingTable t = generate_table(uint32_t(rng.next()), bl);

    std::vector<int> expect = usable_channels(t.blocklist);
    std::vector<int> got = t.sequence;
    std::sort(got.begin(), got.end());
    if (got != expect) return false;
    const size_t n = t.sequence.size();
    for (size_t k = 0; k < n; ++k) {
      int a = carrier_frequency_mhz(t.sequence[k]);
      int b = carrier_frequency_mhz(t.sequence[(k + 1) % n]);
      if (std::abs(a - b) < t.min_hop_distance_mhz) return false;
    }
  }
  return true;
}

bool criterion_invariants() {
  bool ok = true;
  if (!invariant_replay_rejection()) {
    std::fprintf(stderr, "  replay rejection violated\n");
    ok = false;
  }
  if (!invariant_lockout()) {
    std::fprintf(stderr, "  lockout behavior violated\n");
    ok = false;
  }
  if (!invariant_oob_secrecy()) {
    std::fprintf(stderr, "  table/secret confidentiality violated\n");
    ok = false;
  }
  if (!invariant_hopping()) {
    std::fprintf(stderr, "  hopping table properties violated\n");
    ok = false;
  }
  return ok;
}

// ---- 8: byte-identical reruns ----------------------------------------------

bool criterion_determinism() {
  static const char* names[] = {"flooding",       "jamming",    "replay",
                                "forgery",        "forgery_leaked",
                                "compromised"};
  bool ok = true;
  for (const char* n : names) {
    fs::path sc = g_scenarios / (std::string(n) + ".json");
    std::string a = (g_tmp / (std::string(n) + ".a")).string();
    std::string b = (g_tmp / (std::string(n) + ".b")).string();
    for (const auto& base : {a, b}) {
      int rc = run_cli("simulate " + sc.string() + " --trace-out " + base +
                       ".jsonl --summary-out " + base + ".csv --outcomes-out " +
                       base + ".json > " + base + ".stdout");
      if (rc != 0) {
        std::fprintf(stderr, "  scenario %s: exit %d\n", n, rc);
        return false;
      }
    }
    for (const char* ext : {".jsonl", ".csv", ".json", ".stdout"}) {
      if (slurp(a + ext) != slurp(b + ext)) {
        std::fprintf(stderr, "  scenario %s: %s differs between runs\n", n,
                     ext);
        ok = false;
      }
      if (slurp(a + ext).empty()) {
        std::fprintf(stderr, "  scenario %s: %s empty\n", n, ext);
        ok = false;
      }
    }
  }

  std::string ra = (g_tmp / "report.a").string();
  std::string rb = (g_tmp / "report.b").string();
  std::string rep_args = "report " + (g_scenarios / "replay.json").string() +
                         " --format json --seed 7 --mc-episodes 20000"
                         " --bep-blocks 2000 > ";
  if (run_cli(rep_args + ra) != 0 || run_cli(rep_args + rb) != 0) {
    std::fprintf(stderr, "  report run failed\n");
    return false;
  }
  if (slurp(ra).empty() || slurp(ra) != slurp(rb)) {
    std::fprintf(stderr, "  report output differs between runs\n");
    ok = false;
  }
  return ok;
}

} // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <iolwsim-binary> <scenario-dir>\n",
                 argv[0]);
    return 2;
  }
  g_cli = argv[1];
  g_scenarios = argv[2];
  g_tmp = fs::temp_directory_path() /
          ("iolw_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_tmp);

  verdict(1, criterion_advantage(),
          "closed-form advantage bounds match the published figures, "
          "ten-query discrepancy flagged");
  verdict(2, criterion_fips(),
          "FIPS threshold verdicts for tag lengths 32/24/16");
  verdict(3, criterion_monte_carlo(),
          "monte carlo forgery rates within 3 sigma at tag lengths 8 and 16");
  verdict(4, criterion_table_regression(),
          "six canonical scenarios classify exactly as expected via --check");
  verdict(5, criterion_residual(),
          "cycle failure rate tracks the cube law at q=0.05 and q=0.1");
  verdict(6, criterion_bep(),
          "bit flip diffusion: 0.5 +/- 0.02 diffusing, single bit preserving");
  verdict(7, criterion_invariants(),
          "replay rejection, lockout, secrecy, hopping table properties");
  verdict(8, criterion_determinism(),
          "byte-identical artifacts across repeated seeded runs");

  fs::remove_all(g_tmp);
  if (g_failures) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 8 criteria passed\n");
  return 0;
}
