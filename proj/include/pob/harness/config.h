#pragma once

// Scenario files. The JSON mirrors these structs field for field, in the
// units humans write (Mbps, ms); conversion to simulator units happens in
// to_params()/to_topology(). Unknown keys are errors.
//
// {
//   "name": "...", "description": "...",
//   "protocol": {"theta_claimed_mbps", "n", "f", "duration_ms", "rate_policy": "per_n"|"per_n_minus_f",
//                "overprovision", "timer_mode", "t0_ms", "signatures_per_probe"},
//   "topology": {"backhaul": LINK, "uplinks": [LINK + "count"], "clock_offset": DIST,
//                "compute_overhead": {"mode": "zero"|"fixed"|"table", "fixed_ms"},
//                "side_channels": [ids], "side_channel_delay_ms",
//                "cross_traffic": [{"rate_mbps", "start_ms", "stop_ms"}], "cross_traffic_yield",
//                "control_delay_ms", "admission_slack_ms"},
//   "attack": {"corrupt": [{"id", "strategy", "value", "still_reports"}], "prover", "early_response", "ack_quota"},
//   "ladder": {"theta_start_mbps", "delta_mbps", "max_rung_mbps", "timeout_factor"},
//   "run": {"seed", "repetitions", "horizon_ms", "trace", "ping_count", "latency_estimator"},
//   "live": {"verifier", "prover", "challengers": ["host:port"], "t0_unix_ms", "l_ref_ms",
//            "key_seed", "shaper_mbps", "shaper_queue_bytes", "deadline_ms"}
// }
// LINK = {"rate_mbps", "delay_ms", "jitter": DIST, "queue_bytes", "loss"}
// DIST = {"kind": "none"|"uniform"|"normal", "a_ms", "b_ms"}   (normal: a = mean, b = stddev)

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pob/abw.h"
#include "pob/adversary.h"
#include "pob/netsim.h"
#include "pob/schedule.h"
#include "pob/topology.h"

namespace pob::harness {

/// Invalid scenario file. `field` is the dotted path of the offending key.
class ConfigError : public InputError {
 public:
  ConfigError(std::string field, const std::string& what)
      : InputError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DistConfig {
  std::string kind = "none";
  double a_ms = 0;
  double b_ms = 0;
  bool operator==(const DistConfig&) const = default;
};

struct LinkConfig {
  double rate_mbps = 1000;
  double delay_ms = 0;
  DistConfig jitter;
  std::uint64_t queue_bytes = 1'500'000;
  double loss = 0;
  std::uint32_t count = 1;  // identical uplinks this entry stands for
  bool operator==(const LinkConfig&) const = default;
};

struct CrossTrafficConfig {
  double rate_mbps = 0;
  double start_ms = 0;
  double stop_ms = -1;
  bool operator==(const CrossTrafficConfig&) const = default;
};

struct ProtocolConfig {
  double theta_claimed_mbps = 250;
  std::uint32_t n = 10;
  std::uint32_t f = 0;
  double duration_ms = 100;
  std::string rate_policy = "per_n_minus_f";
  double overprovision = 1.10;
  bool timer_mode = false;
  double t0_ms = 1000;
  std::uint32_t signatures_per_probe = 22;
  bool operator==(const ProtocolConfig&) const = default;
};

struct TopologyConfig {
  LinkConfig backhaul{250, 0.1, {}, 1'500'000, 0, 1};
  std::vector<LinkConfig> uplinks;
  DistConfig clock_offset;
  std::string overhead_mode = "zero";
  double overhead_fixed_ms = 0;
  std::vector<std::uint32_t> side_channels;
  double side_channel_delay_ms = 0.1;
  std::vector<CrossTrafficConfig> cross_traffic;
  double cross_traffic_yield = 0;
  double control_delay_ms = 1;
  double admission_slack_ms = 0;  // negative disables schedule admission
  bool operator==(const TopologyConfig&) const = default;
};

struct LadderSection {
  double theta_start_mbps = 40;
  double delta_mbps = 20;
  double max_rung_mbps = 250;
  double timeout_factor = 5;
  bool operator==(const LadderSection&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::uint32_t repetitions = 1;
  double horizon_ms = 0;  // 0: derived from the challenge duration
  bool trace = false;
  std::uint32_t ping_count = 20;
  std::string latency_estimator = "mean";
  bool operator==(const RunConfig&) const = default;
};

struct LiveConfig {
  std::string verifier = "127.0.0.1:7400";
  std::string prover = "127.0.0.1:7401";
  std::vector<std::string> challengers;
  std::uint64_t t0_unix_ms = 0;  // 0: next 10 s boundary at least 3 s away
  double l_ref_ms = 1;
  std::uint64_t key_seed = 1;
  double shaper_mbps = 0;  // 0: no shaping at the prover
  std::uint64_t shaper_queue_bytes = 1'500'000;
  double deadline_ms = 2000;  // after t0
  bool operator==(const LiveConfig&) const = default;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  ProtocolConfig protocol;
  TopologyConfig topology;
  adversary::AttackConfig attack;
  std::optional<LadderSection> ladder;
  RunConfig run;
  std::optional<LiveConfig> live;
  bool operator==(const ScenarioConfig&) const = default;

  schedule::ChallengeParams to_params() const;
  netsim::Topology to_topology() const;
  netsim::SimOptions to_sim_options() const;
  abw::LadderConfig to_ladder() const;
  /// Semantic checks across sections (runs every conversion once).
  void validate() const;
};

ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);
nlohmann::json to_json(const ScenarioConfig& c);

}  // namespace pob::harness
