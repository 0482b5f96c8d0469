#include <cmath>

#include "pob/abw.h"

namespace pob::abw {

void LadderConfig::validate() const {
  if (!(delta > 0)) throw InputError("ladder delta must be positive");
  if (theta_start < delta) throw InputError("ladder theta_start must be at least delta");
  if (max_rung < theta_start) throw InputError("ladder max_rung is below theta_start");
  if (!(timeout_factor >= 1)) throw InputError("ladder timeout_factor must be at least 1");
}

namespace {

// Each rung signs under a fresh m0 so probes cannot be replayed across rungs.
std::array<std::uint8_t, 32> rung_m0(const std::array<std::uint8_t, 32>& base, std::uint32_t rung) {
  Bytes msg(base.begin(), base.end());
  for (int s = 24; s >= 0; s -= 8) msg.push_back(static_cast<std::uint8_t>(rung >> s));
  return crypto::sha256(msg).bytes;
}

}  // namespace

LadderResult run_ladder(const LadderConfig& config, const netsim::Topology& topology,
                        const schedule::ChallengeParams& base, const adversary::AttackConfig& attack,
                        std::uint64_t seed, netsim::SimOptions options) {
  config.validate();
  options.timeout_factor = config.timeout_factor;
  LadderResult result;
  const auto rungs = static_cast<std::uint32_t>(std::floor((config.max_rung - config.theta_start) / config.delta + 1e-9)) + 1;
  for (std::uint32_t r = 0; r < rungs; ++r) {
    Rung rung;
    rung.claimed_bps = config.theta_start + r * config.delta;
    schedule::DeriveOptions derive;
    derive.t0 = base.t0;
    derive.m0 = rung_m0(base.m0, r);
    derive.overprovision = base.overprovision;
    derive.verifier_mode = base.verifier_mode;
    derive.signatures_per_probe = base.signatures_per_probe;
    derive.packet_bytes = base.packet_bytes;
    const auto params = schedule::derive_params(rung.claimed_bps, base.n, base.f, base.duration, base.rate_policy, derive);
    rung.sim = netsim::run_scenario(topology, params, attack, derive_seed(seed, 1000 + r), options);
    rung.output = rung.sim.output;
    rung.not_terminate_count = rung.sim.not_terminate_count;
    rung.terminated = rung.output.has_value() && !rung.sim.majority_not_terminate();
    const bool ok = rung.terminated;
    result.rungs.push_back(std::move(rung));
    if (!ok) {
      if (r == 0) {
        result.below_floor = true;
        result.estimate_bps = 0;
      } else {
        result.estimate_bps = result.rungs[r - 1].output->measured_bps;
      }
      return result;
    }
  }
  result.reached_max = true;
  result.estimate_bps = result.rungs.back().output->measured_bps;
  return result;
}

}  // namespace pob::abw
