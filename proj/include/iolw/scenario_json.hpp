#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "iolw/scenario.hpp"

namespace iolw {

namespace jsondetail {

using nlohmann::json;

// Strict object view: every key must be claimed, leftovers are an error.
// Keeps a dotted path so messages point at the offending spot.
class Obj {
public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw InvalidScenario(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& get(const std::string& key) {
    if (!has(key))
      throw InvalidScenario(path_ + ": missing required key '" + key + "'");
    return j_.at(key);
  }

  const json* maybe(const std::string& key) {
    return has(key) ? &j_.at(key) : nullptr;
  }

  std::string sub(const std::string& key) const { return path_ + "." + key; }

  void done() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw InvalidScenario(path_ + ": unknown key '" + it.key() + "'");
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline uint64_t as_u64(const json& j, const std::string& path) {
  if (!j.is_number_unsigned())
    throw InvalidScenario(path + ": expected a non-negative integer");
  return j.get<uint64_t>();
}

inline uint32_t as_u32(const json& j, const std::string& path) {
  uint64_t v = as_u64(j, path);
  if (v > 0xFFFFFFFFull)
    throw InvalidScenario(path + ": value does not fit in 32 bits");
  return uint32_t(v);
}

inline int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer())
    throw InvalidScenario(path + ": expected an integer");
  return j.get<int>();
}

inline double as_num(const json& j, const std::string& path) {
  if (!j.is_number())
    throw InvalidScenario(path + ": expected a number");
  return j.get<double>();
}

inline bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean())
    throw InvalidScenario(path + ": expected true or false");
  return j.get<bool>();
}

inline std::string as_str(const json& j, const std::string& path) {
  if (!j.is_string())
    throw InvalidScenario(path + ": expected a string");
  return j.get<std::string>();
}

inline const json& as_arr(const json& j, const std::string& path) {
  if (!j.is_array())
    throw InvalidScenario(path + ": expected an array");
  return j;
}

inline Blocklist parse_blocklist(const json& j, const std::string& path) {
  Blocklist b;
  for (const auto& e : as_arr(j, path)) {
    if (e.is_string())
      b.add_spec(e.get<std::string>());
    else
      b.add(as_int(e, path + " entry"));
  }
  return b;
}

inline std::set<int> parse_channel_set(const json& j, const std::string& path) {
  std::set<int> out;
  for (const auto& e : as_arr(j, path)) out.insert(as_int(e, path + " entry"));
  return out;
}

inline DeviceConfig parse_device(const json& j, const std::string& path) {
  Obj o(j, path);
  DeviceConfig d;
  d.device_uid = as_u64(o.get("uid"), o.sub("uid"));
  unsigned tau = 0;
  if (const json* t = o.maybe("tau_bits"))
    tau = unsigned(as_u64(*t, o.sub("tau_bits")));
  d.security_mode = tau ? SecurityMode::secured_tau(tau)
                        : SecurityMode::legacy();
  // secured traffic only fits a DSlot, so the kind follows the mode unless
  // the file insists otherwise
  d.slot_kind = tau ? SlotKind::DSlot : SlotKind::SSlot;
  if (const json* k = o.maybe("slot_kind")) {
    std::string s = as_str(*k, o.sub("slot_kind"));
    if (s == "sslot") d.slot_kind = SlotKind::SSlot;
    else if (s == "dslot") d.slot_kind = SlotKind::DSlot;
    else throw InvalidScenario(o.sub("slot_kind") + ": must be sslot or dslot");
  }
  if (const json* s = o.maybe("safety"))
    d.safety_tagged = as_bool(*s, o.sub("safety"));
  o.done();
  return d;
}

inline CellConfig parse_cell(const json& j, const std::string& path) {
  Obj o(j, path);
  CellConfig cell;
  if (const json* m = o.maybe("min_hop_distance_mhz"))
    cell.min_hop_distance_mhz = as_int(*m, o.sub("min_hop_distance_mhz"));
  size_t mi = 0;
  for (const auto& jm : as_arr(o.get("masters"), o.sub("masters"))) {
    std::string mp = o.sub("masters") + "[" + std::to_string(mi++) + "]";
    Obj om(jm, mp);
    MasterConfig m;
    m.master_id = as_u32(om.get("master_id"), om.sub("master_id"));
    size_t ti = 0;
    for (const auto& jt : as_arr(om.get("tracks"), om.sub("tracks"))) {
      std::string tp = om.sub("tracks") + "[" + std::to_string(ti++) + "]";
      Obj ot(jt, tp);
      TrackConfig t;
      t.track_id = as_int(ot.get("track_id"), ot.sub("track_id"));
      if (const json* h = ot.maybe("hopping_seed"))
        t.hopping_seed = as_u64(*h, ot.sub("hopping_seed"));
      if (const json* b = ot.maybe("blocklist"))
        t.blocklist = parse_blocklist(*b, ot.sub("blocklist"));
      size_t si = 0;
      for (const auto& js : as_arr(ot.get("slots"), ot.sub("slots"))) {
        std::string sp = ot.sub("slots") + "[" + std::to_string(si++) + "]";
        Obj os(js, sp);
        SlotConfig s;
        s.slot_id = as_int(os.get("slot_id"), os.sub("slot_id"));
        if (const json* d = os.maybe("device"))
          s.device = parse_device(*d, os.sub("device"));
        os.done();
        t.slots.push_back(std::move(s));
      }
      ot.done();
      m.tracks.push_back(std::move(t));
    }
    om.done();
    cell.masters.push_back(std::move(m));
  }
  o.done();
  return cell;
}

inline MediumParams parse_medium(const json& j, const std::string& path) {
  Obj o(j, path);
  MediumParams m;
  if (const json* b = o.maybe("bit_error_rate"))
    m.bit_error_rate = as_num(*b, o.sub("bit_error_rate"));
  if (const json* b = o.maybe("burst_failure_rate")) {
    if (m.bit_error_rate != 0.0)
      throw InvalidScenario(path +
                            ": give bit_error_rate or burst_failure_rate, "
                            "not both");
    m.bit_error_rate = MediumParams::rate_for_burst_failure(
        as_num(*b, o.sub("burst_failure_rate")), 24);
  }
  if (const json* s = o.maybe("noise_scope"))
    m.noise_scope = noise_scope_from(as_str(*s, o.sub("noise_scope")));
  if (const json* jj = o.maybe("jam")) {
    Obj oj(*jj, o.sub("jam"));
    JamPlan plan;
    plan.start_cycle = as_u64(oj.get("start_cycle"), oj.sub("start_cycle"));
    plan.stop_cycle = as_u64(oj.get("stop_cycle"), oj.sub("stop_cycle"));
    if (const json* c = oj.maybe("channels")) {
      plan.channels = parse_channel_set(*c, oj.sub("channels"));
      plan.all_channels = false;
    }
    if (const json* a = oj.maybe("all_channels"))
      plan.all_channels = as_bool(*a, oj.sub("all_channels"));
    oj.done();
    m.jam = plan;
  }
  o.done();
  return m;
}

inline DetectionParams parse_detection(const json& j, const std::string& path) {
  Obj o(j, path);
  DetectionParams d;
  if (const json* v = o.maybe("sniffer_enabled"))
    d.sniffer_enabled = as_bool(*v, o.sub("sniffer_enabled"));
  if (const json* v = o.maybe("sniffer_knows_tables"))
    d.sniffer_knows_tables = as_bool(*v, o.sub("sniffer_knows_tables"));
  if (const json* v = o.maybe("flood_rate_factor"))
    d.flood_rate_factor = as_num(*v, o.sub("flood_rate_factor"));
  if (const json* v = o.maybe("flood_window_subcycles"))
    d.flood_window_subcycles = as_int(*v, o.sub("flood_window_subcycles"));
  if (const json* v = o.maybe("flood_burst_floor"))
    d.flood_burst_floor = as_int(*v, o.sub("flood_burst_floor"));
  if (const json* v = o.maybe("jam_window_subcycles"))
    d.jam_window_subcycles = as_int(*v, o.sub("jam_window_subcycles"));
  o.done();
  return d;
}

inline PairingMethod pairing_method_from(const std::string& s,
                                         const std::string& path) {
  if (s == "legacy_unique_id") return PairingMethod::LegacyUniqueId;
  if (s == "secured_oob") return PairingMethod::SecuredOOB;
  if (s == "button") return PairingMethod::Button;
  throw InvalidScenario(path + ": unknown pairing method '" + s + "'");
}

inline ScenarioEvent parse_event(const json& j, const std::string& path) {
  Obj o(j, path);
  ScenarioEvent e;
  e.at_cycle = as_u64(o.get("at_cycle"), o.sub("at_cycle"));
  std::string action = as_str(o.get("action"), o.sub("action"));

  auto want_port = [&](bool slot) {
    e.master_id = as_u32(o.get("master_id"), o.sub("master_id"));
    e.track_id = as_int(o.get("track_id"), o.sub("track_id"));
    if (slot) e.slot_id = as_int(o.get("slot_id"), o.sub("slot_id"));
  };

  if (action == "enter_service_mode") {
    e.action = ActionKind::EnterServiceMode;
    want_port(false);
  } else if (action == "exit_service_mode") {
    e.action = ActionKind::ExitServiceMode;
    want_port(false);
  } else if (action == "pair_unique_id") {
    e.action = ActionKind::PairUniqueId;
    want_port(true);
    e.device = parse_device(o.get("device"), o.sub("device"));
    e.method = pairing_method_from(as_str(o.get("method"), o.sub("method")),
                                   o.sub("method"));
  } else if (action == "pair_button") {
    e.action = ActionKind::PairButton;
    want_port(true);
    e.device = parse_device(o.get("device"), o.sub("device"));
  } else if (action == "roam") {
    e.action = ActionKind::Roam;
    e.device_uid = as_u64(o.get("device_uid"), o.sub("device_uid"));
    e.to_master = as_u32(o.get("to_master"), o.sub("to_master"));
    e.to_track = as_int(o.get("to_track"), o.sub("to_track"));
    e.to_slot = as_int(o.get("to_slot"), o.sub("to_slot"));
    e.lease_cycles = as_u64(o.get("lease_cycles"), o.sub("lease_cycles"));
  } else if (action == "return_home") {
    e.action = ActionKind::ReturnHome;
    e.device_uid = as_u64(o.get("device_uid"), o.sub("device_uid"));
  } else if (action == "adaptive_switch") {
    e.action = ActionKind::AdaptiveSwitch;
    e.master_id = as_u32(o.get("master_id"), o.sub("master_id"));
    e.track_id = as_int(o.get("track_id"), o.sub("track_id"));
    if (const json* b = o.maybe("blocklist"))
      e.new_blocklist = parse_blocklist(*b, o.sub("blocklist"));
  } else if (action == "reconfigure") {
    e.action = ActionKind::Reconfigure;
    e.device_uid = as_u64(o.get("device_uid"), o.sub("device_uid"));
  } else {
    throw InvalidScenario(o.sub("action") + ": unknown action '" + action +
                          "'");
  }
  o.done();
  return e;
}

inline AttackSpec parse_attack(const json& j, const std::string& path) {
  Obj o(j, path);
  AttackSpec a;
  a.kind = attack_kind_from(as_str(o.get("kind"), o.sub("kind")));
  if (const json* g = o.maybe("grants")) {
    Obj og(*g, o.sub("grants"));
    if (const json* v = og.maybe("iolw_config"))
      a.grants.iolw_config = as_bool(*v, og.sub("iolw_config"));
    if (const json* v = og.maybe("hopping_table"))
      a.grants.hopping_table = as_bool(*v, og.sub("hopping_table"));
    if (const json* v = og.maybe("counter_value"))
      a.grants.counter_value = as_bool(*v, og.sub("counter_value"));
    if (const json* v = og.maybe("leaked_key"))
      a.grants.leaked_key = as_bool(*v, og.sub("leaked_key"));
    og.done();
  }
  if (const json* p = o.maybe("physical")) {
    Obj op(*p, o.sub("physical"));
    if (const json* v = op.maybe("proximity"))
      a.physical.proximity = as_bool(*v, op.sub("proximity"));
    if (const json* v = op.maybe("device_access"))
      a.physical.device_access = as_bool(*v, op.sub("device_access"));
    op.done();
  }
  if (const json* v = o.maybe("sniff_start"))
    a.sniff_start = as_u64(*v, o.sub("sniff_start"));
  if (const json* v = o.maybe("sniff_stop"))
    a.sniff_stop = as_u64(*v, o.sub("sniff_stop"));
  a.start_cycle = as_u64(o.get("start_cycle"), o.sub("start_cycle"));
  a.stop_cycle = as_u64(o.get("stop_cycle"), o.sub("stop_cycle"));
  if (const json* v = o.maybe("target_uid"))
    a.target_uid = as_u64(*v, o.sub("target_uid"));
  if (const json* v = o.maybe("target_track"))
    a.target_track = as_int(*v, o.sub("target_track"));
  if (const json* v = o.maybe("intensity"))
    a.intensity = as_int(*v, o.sub("intensity"));
  if (const json* v = o.maybe("channels")) {
    a.channels = parse_channel_set(*v, o.sub("channels"));
    a.all_channels = false;
  }
  if (const json* v = o.maybe("all_channels"))
    a.all_channels = as_bool(*v, o.sub("all_channels"));
  if (const json* v = o.maybe("counter_jump"))
    a.counter_jump = as_u32(*v, o.sub("counter_jump"));
  o.done();
  return a;
}

} // namespace jsondetail

// Parse a scenario from JSON text. The schema is strict: an unknown key
// anywhere is an error, as is a value of the wrong shape. Structural errors
// carry line and column, semantic ones a dotted path.
inline Scenario scenario_from_json(const std::string& text,
                                   const std::string& origin = "scenario") {
  using jsondetail::Obj;
  using jsondetail::json;
  namespace jd = jsondetail;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    // the exception reports a byte offset; turn it into line and column
    size_t line = 1, col = 1;
    size_t stop = std::min(text.size(), err.byte ? err.byte - 1 : 0);
    for (size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    // strip the library's "[json.exception...] parse error at line L,
    // column C: " preamble; position is already in our prefix
    std::string detail = err.what();
    if (auto pos = detail.find("] "); pos != std::string::npos)
      detail = detail.substr(pos + 2);
    if (detail.rfind("parse error", 0) == 0) {
      if (auto pos = detail.find(": "); pos != std::string::npos)
        detail = detail.substr(pos + 2);
    }
    std::ostringstream msg;
    msg << origin << ":" << line << ":" << col << ": " << detail;
    throw InvalidScenario(msg.str());
  }

  Obj o(root, origin);
  Scenario sc;
  if (const json* v = o.maybe("id")) sc.id = jd::as_str(*v, o.sub("id"));
  sc.cell = jd::parse_cell(o.get("cell"), o.sub("cell"));
  if (const json* v = o.maybe("medium"))
    sc.medium = jd::parse_medium(*v, o.sub("medium"));
  if (const json* v = o.maybe("detection"))
    sc.detection = jd::parse_detection(*v, o.sub("detection"));
  if (const json* v = o.maybe("safety")) {
    Obj os(*v, o.sub("safety"));
    if (const json* w = os.maybe("watchdog_cycles"))
      sc.safety.watchdog_cycles = jd::as_u64(*w, os.sub("watchdog_cycles"));
    os.done();
  }
  if (const json* v = o.maybe("events")) {
    size_t i = 0;
    for (const auto& je : jd::as_arr(*v, o.sub("events")))
      sc.events.push_back(jd::parse_event(
          je, o.sub("events") + "[" + std::to_string(i++) + "]"));
  }
  if (const json* v = o.maybe("attacks")) {
    size_t i = 0;
    for (const auto& ja : jd::as_arr(*v, o.sub("attacks")))
      sc.attacks.push_back(jd::parse_attack(
          ja, o.sub("attacks") + "[" + std::to_string(i++) + "]"));
  }
  if (const json* v = o.maybe("auto_reconfigure_cycles"))
    sc.auto_reconfigure_cycles =
        jd::as_u64(*v, o.sub("auto_reconfigure_cycles"));
  if (const json* v = o.maybe("master_budget_per_subcycle"))
    sc.master_budget_per_subcycle =
        jd::as_int(*v, o.sub("master_budget_per_subcycle"));
  if (const json* v = o.maybe("button_ports")) {
    size_t i = 0;
    for (const auto& jp : jd::as_arr(*v, o.sub("button_ports"))) {
      std::string pp = o.sub("button_ports") + "[" + std::to_string(i++) + "]";
      Obj op(jp, pp);
      PortKey k;
      k.master_id = jd::as_u32(op.get("master_id"), op.sub("master_id"));
      k.track_id = jd::as_int(op.get("track_id"), op.sub("track_id"));
      k.slot_id = jd::as_int(op.get("slot_id"), op.sub("slot_id"));
      op.done();
      sc.button_ports.push_back(k);
    }
  }
  if (const json* v = o.maybe("roaming_allowlists")) {
    if (!v->is_object())
      throw InvalidScenario(o.sub("roaming_allowlists") +
                            ": expected an object keyed by master id");
    for (auto it = v->begin(); it != v->end(); ++it) {
      uint32_t mid = 0;
      try {
        size_t used = 0;
        unsigned long parsed = std::stoul(it.key(), &used);
        if (used != it.key().size() || parsed > 0xFFFFFFFFul)
          throw std::invalid_argument("");
        mid = uint32_t(parsed);
      } catch (const std::exception&) {
        throw InvalidScenario(o.sub("roaming_allowlists") + ": key '" +
                              it.key() + "' is not a master id");
      }
      std::string lp = o.sub("roaming_allowlists") + "." + it.key();
      for (const auto& ju : jd::as_arr(it.value(), lp))
        sc.roaming_allowlists[mid].insert(jd::as_u64(ju, lp + " entry"));
    }
  }
  if (const json* v = o.maybe("oob_available"))
    sc.oob_available = jd::as_bool(*v, o.sub("oob_available"));
  if (const json* v = o.maybe("seed")) {
    sc.seed = jd::as_u64(*v, o.sub("seed"));
    sc.seed_explicit = true;
  }
  if (const json* v = o.maybe("horizon_cycles"))
    sc.horizon_cycles = jd::as_u64(*v, o.sub("horizon_cycles"));
  if (const json* v = o.maybe("counting_only"))
    sc.counting_only = jd::as_bool(*v, o.sub("counting_only"));
  if (const json* v = o.maybe("outputs")) {
    Obj oo(*v, o.sub("outputs"));
    if (const json* w = oo.maybe("trace_jsonl"))
      sc.outputs.trace_jsonl = jd::as_str(*w, oo.sub("trace_jsonl"));
    if (const json* w = oo.maybe("summary_csv"))
      sc.outputs.summary_csv = jd::as_str(*w, oo.sub("summary_csv"));
    if (const json* w = oo.maybe("outcomes_json"))
      sc.outputs.outcomes_json = jd::as_str(*w, oo.sub("outcomes_json"));
    oo.done();
  }
  o.done();

  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str(), path);
}

} // namespace iolw
