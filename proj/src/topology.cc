#include <algorithm>
#include <array>
#include <cmath>

#include "pob/topology.h"

namespace pob::netsim {

double Distribution::draw(Rng& rng) const {
  switch (kind) {
    case Kind::none: return 0;
    case Kind::uniform: return rng.uniform(a, b);
    case Kind::normal: return rng.normal(a, b);
  }
  return 0;
}

DurationNs Distribution::draw_jitter(Rng& rng) const {
  if (kind == Kind::none) return 0;
  return static_cast<DurationNs>(std::llround(std::max(0.0, draw(rng))));
}

const char* to_string(Distribution::Kind k) {
  switch (k) {
    case Distribution::Kind::none: return "none";
    case Distribution::Kind::uniform: return "uniform";
    case Distribution::Kind::normal: return "normal";
  }
  return "?";
}

Distribution::Kind distribution_kind_from_string(const std::string& s) {
  if (s == "none") return Distribution::Kind::none;
  if (s == "uniform") return Distribution::Kind::uniform;
  if (s == "normal") return Distribution::Kind::normal;
  throw InputError("unknown distribution '" + s + "' (none, uniform, normal)");
}

const char* to_string(OverheadMode m) {
  switch (m) {
    case OverheadMode::zero: return "zero";
    case OverheadMode::fixed: return "fixed";
    case OverheadMode::table: return "table";
  }
  return "?";
}

OverheadMode overhead_mode_from_string(const std::string& s) {
  if (s == "zero") return OverheadMode::zero;
  if (s == "fixed") return OverheadMode::fixed;
  if (s == "table") return OverheadMode::table;
  throw InputError("unknown overhead mode '" + s + "' (zero, fixed, table)");
}

double Topology::effective_backhaul_rate(DurationNs since_t0, bool queue_busy) const {
  double cross = 0;
  for (const auto& flow : cross_traffic) {
    if (since_t0 >= flow.start && (flow.stop < 0 || since_t0 < flow.stop)) cross += flow.rate_bps;
  }
  if (queue_busy) cross *= 1.0 - cross_traffic_yield;
  return std::max(backhaul.rate_bps - cross, backhaul.rate_bps * 0.01);
}

namespace {

void check_link(const LinkModel& l, const std::string& name) {
  if (!(l.rate_bps > 0)) throw InputError(name + ": rate must be positive");
  if (l.propagation < 0) throw InputError(name + ": propagation delay must be non-negative");
  if (l.loss_rate < 0 || l.loss_rate > 1) throw InputError(name + ": loss rate must be in [0, 1]");
  if (l.queue_capacity == 0) throw InputError(name + ": queue capacity must be positive");
  if (l.jitter.kind == Distribution::Kind::uniform && l.jitter.b < l.jitter.a) {
    throw InputError(name + ": uniform jitter needs a <= b");
  }
  if (l.jitter.kind == Distribution::Kind::normal && l.jitter.b < 0) {
    throw InputError(name + ": normal jitter needs a non-negative stddev");
  }
}

}  // namespace

void Topology::validate() const {
  check_link(backhaul, "backhaul");
  if (uplinks.empty()) throw InputError("topology needs at least one challenger uplink");
  for (std::size_t i = 0; i < uplinks.size(); ++i) check_link(uplinks[i], "uplink " + std::to_string(i));
  for (auto id : side_channels) {
    if (id >= uplinks.size()) throw InputError("side channel names unknown challenger " + std::to_string(id));
  }
  if (side_channel_delay < 0 || control_delay < 0 || fixed_overhead < 0) {
    throw InputError("delays must be non-negative");
  }
  if (cross_traffic_yield < 0 || cross_traffic_yield > 1) throw InputError("cross_traffic_yield must be in [0, 1]");
  for (const auto& flow : cross_traffic) {
    if (flow.rate_bps < 0) throw InputError("cross traffic rate must be non-negative");
    if (flow.stop >= 0 && flow.stop < flow.start) throw InputError("cross traffic stops before it starts");
  }
}

Topology Topology::ideal(std::uint32_t n, double backhaul_rate, double uplink_rate, DurationNs uplink_delay) {
  Topology t;
  t.backhaul = LinkModel{backhaul_rate, 100'000, {}, 1'500'000, 0};
  t.uplinks.assign(n, LinkModel{uplink_rate, uplink_delay, {}, 1'500'000, 0});
  return t;
}

DurationNs calibrate_overhead(double theta_bps) {
  static constexpr std::array<std::pair<double, double>, 3> kTable{{{500e6, 4.6}, {750e6, 7.3}, {1000e6, 10.2}}};
  if (!(theta_bps > 0)) throw InputError("backhaul rate must be positive");
  std::size_t seg = 0;
  if (theta_bps > kTable[1].first) seg = 1;
  const auto [x0, y0] = kTable[seg];
  const auto [x1, y1] = kTable[seg + 1];
  const double ms = y0 + (y1 - y0) * (theta_bps - x0) / (x1 - x0);
  return millis(std::max(ms, 0.0));
}

DurationNs compute_overhead(const Topology& topology, double theta_bps) {
  switch (topology.overhead_mode) {
    case OverheadMode::zero: return 0;
    case OverheadMode::fixed: return topology.fixed_overhead;
    case OverheadMode::table: return calibrate_overhead(theta_bps);
  }
  return 0;
}

}  // namespace pob::netsim
