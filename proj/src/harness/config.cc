#include <cmath>
#include <fstream>
#include <set>

#include "pob/harness/config.h"

namespace pob::harness {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  template <typename T>
  void opt(const std::string& key, T& out) {
    if (const auto* v = find(key)) out = convert<T>(*v, field(key));
  }

  template <typename T>
  T req(const std::string& key) {
    const auto* v = find(key);
    if (v == nullptr) throw ConfigError(field(key), "required");
    return convert<T>(*v, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) throw ConfigError(field(k), "unknown key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ConfigError(where, "must be finite");
      return d;
    } else {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(where, "expected a non-negative integer");
      }
      const auto u = v.get<std::uint64_t>();
      if (u > std::numeric_limits<T>::max()) throw ConfigError(where, "out of range");
      return static_cast<T>(u);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

DistConfig parse_dist(const json& j, const std::string& path) {
  Reader r(j, path);
  DistConfig d;
  r.opt("kind", d.kind);
  r.opt("a_ms", d.a_ms);
  r.opt("b_ms", d.b_ms);
  r.finish();
  try {
    netsim::distribution_kind_from_string(d.kind);
  } catch (const InputError& e) {
    throw ConfigError(path + ".kind", e.what());
  }
  return d;
}

LinkConfig parse_link(const json& j, const std::string& path, bool allow_count) {
  Reader r(j, path);
  LinkConfig l;
  l.rate_mbps = r.req<double>("rate_mbps");
  r.opt("delay_ms", l.delay_ms);
  if (const auto* v = r.find("jitter")) l.jitter = parse_dist(*v, r.field("jitter"));
  r.opt("queue_bytes", l.queue_bytes);
  r.opt("loss", l.loss);
  if (allow_count) r.opt("count", l.count);
  r.finish();
  if (!(l.rate_mbps > 0)) throw ConfigError(path + ".rate_mbps", "must be positive");
  if (l.delay_ms < 0) throw ConfigError(path + ".delay_ms", "must be non-negative");
  if (l.loss < 0 || l.loss > 1) throw ConfigError(path + ".loss", "must be in [0, 1]");
  if (l.queue_bytes == 0) throw ConfigError(path + ".queue_bytes", "must be positive");
  if (l.count == 0) throw ConfigError(path + ".count", "must be positive");
  return l;
}

json link_json(const LinkConfig& l, bool with_count) {
  json j{{"rate_mbps", l.rate_mbps},
         {"delay_ms", l.delay_ms},
         {"jitter", {{"kind", l.jitter.kind}, {"a_ms", l.jitter.a_ms}, {"b_ms", l.jitter.b_ms}}},
         {"queue_bytes", l.queue_bytes},
         {"loss", l.loss}};
  if (with_count) j["count"] = l.count;
  return j;
}

json dist_json(const DistConfig& d) { return {{"kind", d.kind}, {"a_ms", d.a_ms}, {"b_ms", d.b_ms}}; }

DurationNs ms_to_ns(double ms) { return static_cast<DurationNs>(std::llround(ms * 1e6)); }

netsim::Distribution to_distribution(const DistConfig& d) {
  return {netsim::distribution_kind_from_string(d.kind), d.a_ms * 1e6, d.b_ms * 1e6};
}

netsim::LinkModel to_link(const LinkConfig& l) {
  return {l.rate_mbps * 1e6, ms_to_ns(l.delay_ms), to_distribution(l.jitter), l.queue_bytes, l.loss};
}

}  // namespace

ScenarioConfig parse_config(const json& j) {
  ScenarioConfig c;
  Reader root(j, "");
  root.opt("name", c.name);
  root.opt("description", c.description);

  {
    const auto* pj = root.find("protocol");
    if (pj == nullptr) throw ConfigError("protocol", "required");
    Reader r(*pj, "protocol");
    auto& p = c.protocol;
    p.theta_claimed_mbps = r.req<double>("theta_claimed_mbps");
    p.n = r.req<std::uint32_t>("n");
    r.opt("f", p.f);
    p.duration_ms = r.req<double>("duration_ms");
    r.opt("rate_policy", p.rate_policy);
    r.opt("overprovision", p.overprovision);
    r.opt("timer_mode", p.timer_mode);
    r.opt("t0_ms", p.t0_ms);
    r.opt("signatures_per_probe", p.signatures_per_probe);
    r.finish();
  }

  if (const auto* tj = root.find("topology")) {
    Reader r(*tj, "topology");
    auto& t = c.topology;
    if (const auto* v = r.find("backhaul")) t.backhaul = parse_link(*v, "topology.backhaul", false);
    if (const auto* v = r.find("uplinks")) {
      if (!v->is_array()) throw ConfigError("topology.uplinks", "expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        t.uplinks.push_back(parse_link((*v)[i], "topology.uplinks[" + std::to_string(i) + "]", true));
      }
    }
    if (const auto* v = r.find("clock_offset")) t.clock_offset = parse_dist(*v, "topology.clock_offset");
    if (const auto* v = r.find("compute_overhead")) {
      Reader o(*v, "topology.compute_overhead");
      o.opt("mode", t.overhead_mode);
      o.opt("fixed_ms", t.overhead_fixed_ms);
      o.finish();
    }
    if (const auto* v = r.find("side_channels")) {
      if (!v->is_array()) throw ConfigError("topology.side_channels", "expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        t.side_channels.push_back(
            Reader::convert<std::uint32_t>((*v)[i], "topology.side_channels[" + std::to_string(i) + "]"));
      }
    }
    r.opt("side_channel_delay_ms", t.side_channel_delay_ms);
    if (const auto* v = r.find("cross_traffic")) {
      if (!v->is_array()) throw ConfigError("topology.cross_traffic", "expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        Reader x((*v)[i], "topology.cross_traffic[" + std::to_string(i) + "]");
        CrossTrafficConfig ct;
        ct.rate_mbps = x.req<double>("rate_mbps");
        x.opt("start_ms", ct.start_ms);
        x.opt("stop_ms", ct.stop_ms);
        x.finish();
        t.cross_traffic.push_back(ct);
      }
    }
    r.opt("cross_traffic_yield", t.cross_traffic_yield);
    r.opt("control_delay_ms", t.control_delay_ms);
    r.opt("admission_slack_ms", t.admission_slack_ms);
    r.finish();
  }

  if (const auto* aj = root.find("attack")) {
    Reader r(*aj, "attack");
    if (const auto* v = r.find("corrupt")) {
      if (!v->is_array()) throw ConfigError("attack.corrupt", "expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string path = "attack.corrupt[" + std::to_string(i) + "]";
        Reader x((*v)[i], path);
        adversary::CorruptChallenger cc;
        cc.id = x.req<std::uint32_t>("id");
        const auto s = x.req<std::string>("strategy");
        try {
          cc.strategy = adversary::challenger_strategy_from_string(s);
        } catch (const InputError& e) {
          throw ConfigError(path + ".strategy", e.what());
        }
        x.opt("value", cc.value);
        x.opt("still_reports", cc.still_reports);
        x.finish();
        c.attack.corrupt.push_back(cc);
      }
    }
    if (const auto* v = r.find("prover")) {
      try {
        c.attack.prover = adversary::prover_strategy_from_string(Reader::convert<std::string>(*v, "attack.prover"));
      } catch (const ConfigError&) {
        throw;
      } catch (const InputError& e) {
        throw ConfigError("attack.prover", e.what());
      }
    }
    r.opt("early_response", c.attack.early_response);
    r.opt("ack_quota", c.attack.ack_quota);
    r.finish();
  }

  if (const auto* lj = root.find("ladder")) {
    Reader r(*lj, "ladder");
    LadderSection l;
    r.opt("theta_start_mbps", l.theta_start_mbps);
    r.opt("delta_mbps", l.delta_mbps);
    r.opt("max_rung_mbps", l.max_rung_mbps);
    r.opt("timeout_factor", l.timeout_factor);
    r.finish();
    c.ladder = l;
  }

  if (const auto* rj = root.find("run")) {
    Reader r(*rj, "run");
    auto& run = c.run;
    r.opt("seed", run.seed);
    r.opt("repetitions", run.repetitions);
    r.opt("horizon_ms", run.horizon_ms);
    r.opt("trace", run.trace);
    r.opt("ping_count", run.ping_count);
    r.opt("latency_estimator", run.latency_estimator);
    r.finish();
  }

  if (const auto* lj = root.find("live")) {
    Reader r(*lj, "live");
    LiveConfig l;
    r.opt("verifier", l.verifier);
    r.opt("prover", l.prover);
    if (const auto* v = r.find("challengers")) {
      if (!v->is_array()) throw ConfigError("live.challengers", "expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        l.challengers.push_back(Reader::convert<std::string>((*v)[i], "live.challengers[" + std::to_string(i) + "]"));
      }
    }
    r.opt("t0_unix_ms", l.t0_unix_ms);
    r.opt("l_ref_ms", l.l_ref_ms);
    r.opt("key_seed", l.key_seed);
    r.opt("shaper_mbps", l.shaper_mbps);
    r.opt("shaper_queue_bytes", l.shaper_queue_bytes);
    r.opt("deadline_ms", l.deadline_ms);
    r.finish();
    c.live = l;
  }
  root.finish();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["description"] = c.description;
  const auto& p = c.protocol;
  j["protocol"] = {{"theta_claimed_mbps", p.theta_claimed_mbps},
                   {"n", p.n},
                   {"f", p.f},
                   {"duration_ms", p.duration_ms},
                   {"rate_policy", p.rate_policy},
                   {"overprovision", p.overprovision},
                   {"timer_mode", p.timer_mode},
                   {"t0_ms", p.t0_ms},
                   {"signatures_per_probe", p.signatures_per_probe}};
  const auto& t = c.topology;
  json uplinks = json::array();
  for (const auto& l : t.uplinks) uplinks.push_back(link_json(l, true));
  json cross = json::array();
  for (const auto& x : t.cross_traffic) {
    cross.push_back({{"rate_mbps", x.rate_mbps}, {"start_ms", x.start_ms}, {"stop_ms", x.stop_ms}});
  }
  j["topology"] = {{"backhaul", link_json(t.backhaul, false)},
                   {"uplinks", uplinks},
                   {"clock_offset", dist_json(t.clock_offset)},
                   {"compute_overhead", {{"mode", t.overhead_mode}, {"fixed_ms", t.overhead_fixed_ms}}},
                   {"side_channels", t.side_channels},
                   {"side_channel_delay_ms", t.side_channel_delay_ms},
                   {"cross_traffic", cross},
                   {"cross_traffic_yield", t.cross_traffic_yield},
                   {"control_delay_ms", t.control_delay_ms},
                   {"admission_slack_ms", t.admission_slack_ms}};
  json corrupt = json::array();
  for (const auto& cc : c.attack.corrupt) {
    corrupt.push_back({{"id", cc.id},
                       {"strategy", adversary::to_string(cc.strategy)},
                       {"value", cc.value},
                       {"still_reports", cc.still_reports}});
  }
  j["attack"] = {{"corrupt", corrupt},
                 {"prover", adversary::to_string(c.attack.prover)},
                 {"early_response", c.attack.early_response},
                 {"ack_quota", c.attack.ack_quota}};
  if (c.ladder) {
    j["ladder"] = {{"theta_start_mbps", c.ladder->theta_start_mbps},
                   {"delta_mbps", c.ladder->delta_mbps},
                   {"max_rung_mbps", c.ladder->max_rung_mbps},
                   {"timeout_factor", c.ladder->timeout_factor}};
  }
  j["run"] = {{"seed", c.run.seed},
              {"repetitions", c.run.repetitions},
              {"horizon_ms", c.run.horizon_ms},
              {"trace", c.run.trace},
              {"ping_count", c.run.ping_count},
              {"latency_estimator", c.run.latency_estimator}};
  if (c.live) {
    const auto& l = *c.live;
    j["live"] = {{"verifier", l.verifier},
                 {"prover", l.prover},
                 {"challengers", l.challengers},
                 {"t0_unix_ms", l.t0_unix_ms},
                 {"l_ref_ms", l.l_ref_ms},
                 {"key_seed", l.key_seed},
                 {"shaper_mbps", l.shaper_mbps},
                 {"shaper_queue_bytes", l.shaper_queue_bytes},
                 {"deadline_ms", l.deadline_ms}};
  }
  return j;
}

schedule::ChallengeParams ScenarioConfig::to_params() const {
  const auto& p = protocol;
  schedule::RatePolicy policy;
  try {
    policy = schedule::rate_policy_from_string(p.rate_policy);
  } catch (const InputError& e) {
    throw ConfigError("protocol.rate_policy", e.what());
  }
  schedule::DeriveOptions o;
  o.t0 = static_cast<TimeNs>(ms_to_ns(p.t0_ms));
  o.overprovision = p.overprovision;
  o.verifier_mode = p.timer_mode ? schedule::VerifierMode::timer : schedule::VerifierMode::lazy;
  o.signatures_per_probe = p.signatures_per_probe;
  try {
    return schedule::derive_params(p.theta_claimed_mbps * 1e6, p.n, p.f, ms_to_ns(p.duration_ms), policy, o);
  } catch (const InputError& e) {
    throw ConfigError("protocol", e.what());
  }
}

netsim::Topology ScenarioConfig::to_topology() const {
  const auto& t = topology;
  netsim::Topology out;
  try {
    out.backhaul = to_link(t.backhaul);
    for (const auto& l : t.uplinks) {
      for (std::uint32_t i = 0; i < l.count; ++i) out.uplinks.push_back(to_link(l));
    }
    out.clock_offset = to_distribution(t.clock_offset);
    out.overhead_mode = netsim::overhead_mode_from_string(t.overhead_mode);
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError("topology", e.what());
  }
  out.fixed_overhead = ms_to_ns(t.overhead_fixed_ms);
  out.side_channels.insert(t.side_channels.begin(), t.side_channels.end());
  out.side_channel_delay = ms_to_ns(t.side_channel_delay_ms);
  for (const auto& x : t.cross_traffic) {
    out.cross_traffic.push_back({x.rate_mbps * 1e6, ms_to_ns(x.start_ms), x.stop_ms < 0 ? -1 : ms_to_ns(x.stop_ms)});
  }
  out.cross_traffic_yield = t.cross_traffic_yield;
  out.control_delay = ms_to_ns(t.control_delay_ms);
  out.admission_slack = t.admission_slack_ms < 0 ? -1 : ms_to_ns(t.admission_slack_ms);
  return out;
}

netsim::SimOptions ScenarioConfig::to_sim_options() const {
  netsim::SimOptions o;
  o.horizon = ms_to_ns(run.horizon_ms);
  o.record_trace = run.trace;
  o.ping_count = run.ping_count;
  if (run.latency_estimator == "mean") {
    o.estimator = schedule::LatencyEstimator::mean;
  } else if (run.latency_estimator == "median") {
    o.estimator = schedule::LatencyEstimator::median;
  } else {
    throw ConfigError("run.latency_estimator", "expected mean or median");
  }
  if (ladder) o.timeout_factor = ladder->timeout_factor;
  return o;
}

abw::LadderConfig ScenarioConfig::to_ladder() const {
  if (!ladder) throw ConfigError("ladder", "scenario has no ladder section");
  abw::LadderConfig l{ladder->theta_start_mbps * 1e6, ladder->delta_mbps * 1e6, ladder->max_rung_mbps * 1e6,
                      ladder->timeout_factor};
  try {
    l.validate();
  } catch (const InputError& e) {
    throw ConfigError("ladder", e.what());
  }
  return l;
}

void ScenarioConfig::validate() const {
  const auto params = to_params();
  if (run.repetitions == 0) throw ConfigError("run.repetitions", "must be at least 1");
  if (run.ping_count == 0) throw ConfigError("run.ping_count", "must be at least 1");
  if (ladder) to_ladder();
  to_sim_options();
  if (live) {
    if (live->challengers.size() != protocol.n) {
      throw ConfigError("live.challengers", "needs exactly n = " + std::to_string(protocol.n) + " addresses");
    }
    if (live->deadline_ms <= 0) throw ConfigError("live.deadline_ms", "must be positive");
  }
  if (topology.uplinks.empty()) {
    if (!live) throw ConfigError("topology.uplinks", "required for simulation");
    return;
  }
  const auto topo = to_topology();
  try {
    topo.validate();
  } catch (const InputError& e) {
    throw ConfigError("topology", e.what());
  }
  if (topo.n() != protocol.n) {
    throw ConfigError("topology.uplinks",
                      "describes " + std::to_string(topo.n()) + " challengers but protocol.n = " + std::to_string(protocol.n));
  }
  try {
    attack.validate(params, topo);
  } catch (const InputError& e) {
    throw ConfigError("attack", e.what());
  }
}

}  // namespace pob::harness
