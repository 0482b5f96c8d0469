#pragma once

// Static description of the simulated network: a core node, one access link
// per challenger, the prover's backhaul, optional side links for adversarial
// challengers, and fluid cross traffic on the backhaul.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pob/random.h"
#include "pob/types.h"

namespace pob::netsim {

/// none, uniform(a, b) or normal(a = mean, b = stddev), all in ns.
struct Distribution {
  enum class Kind { none, uniform, normal };
  Kind kind = Kind::none;
  double a = 0;
  double b = 0;

  static Distribution none() { return {}; }
  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static Distribution normal(double mean, double stddev) { return {Kind::normal, mean, stddev}; }

  double draw(Rng& rng) const;
  /// Jitter is never negative: draws are clamped at 0.
  DurationNs draw_jitter(Rng& rng) const;
  bool operator==(const Distribution&) const = default;
};

const char* to_string(Distribution::Kind k);
Distribution::Kind distribution_kind_from_string(const std::string& s);

struct LinkModel {
  double rate_bps = 1e9;
  DurationNs propagation = 0;
  Distribution jitter;
  std::uint64_t queue_capacity = 1'500'000;  // bytes, drop-tail
  double loss_rate = 0;
  bool operator==(const LinkModel&) const = default;
};

/// Background flow consuming `rate_bps` of the backhaul between start and stop
/// (offsets from t0; stop < 0 means it never stops).
struct CrossTrafficFlow {
  double rate_bps = 0;
  DurationNs start = 0;
  DurationNs stop = -1;
  bool operator==(const CrossTrafficFlow&) const = default;
};

enum class OverheadMode { zero, fixed, table };
const char* to_string(OverheadMode m);
OverheadMode overhead_mode_from_string(const std::string& s);

struct Topology {
  LinkModel backhaul{250e6, 100'000, {}, 1'500'000, 0};
  std::vector<LinkModel> uplinks;
  /// Offset of each challenger's clock from true time, drawn once per run.
  Distribution clock_offset;
  OverheadMode overhead_mode = OverheadMode::zero;
  DurationNs fixed_overhead = 0;
  /// Challengers with a zero-queue link straight to the prover.
  std::set<std::uint32_t> side_channels;
  DurationNs side_channel_delay = 100'000;
  std::vector<CrossTrafficFlow> cross_traffic;
  /// Fraction of the cross traffic that yields to challenge traffic while the
  /// backhaul queue is busy. 0 models inelastic background load.
  double cross_traffic_yield = 0;
  /// One-way delay of verifier control messages.
  DurationNs control_delay = 1'000'000;
  /// Slack for the honest prover's schedule admission; negative disables it.
  DurationNs admission_slack = 0;

  std::uint32_t n() const { return static_cast<std::uint32_t>(uplinks.size()); }
  /// Rate the backhaul drains challenge traffic at `since_t0` past t0.
  double effective_backhaul_rate(DurationNs since_t0, bool queue_busy) const;
  /// Throws InputError on inconsistent values.
  void validate() const;
  bool operator==(const Topology&) const = default;

  /// Identical challengers on `uplink_rate` links with `uplink_delay` each,
  /// behind a `backhaul_rate` backhaul; no jitter, offsets, loss or overhead.
  static Topology ideal(std::uint32_t n, double backhaul_rate, double uplink_rate = 10e9,
                        DurationNs uplink_delay = 1'000'000);
};

/// Prover computation time before responding, interpolated through
/// (500 Mbps, 4.6 ms), (750, 7.3 ms), (1000, 10.2 ms) and extended linearly.
DurationNs calibrate_overhead(double theta_bps);

DurationNs compute_overhead(const Topology& topology, double theta_bps);

}  // namespace pob::netsim
