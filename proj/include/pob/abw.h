#pragma once

// Available-bandwidth ladder: repeat the challenge at claimed rates
// theta_start, theta_start + delta, ... and keep the last round that terminated.

#include <cstdint>
#include <vector>

#include "pob/adversary.h"
#include "pob/netsim.h"
#include "pob/schedule.h"

namespace pob::abw {

struct LadderConfig {
  double theta_start = 40e6;
  double delta = 20e6;
  double max_rung = 250e6;
  double timeout_factor = 5;
  bool operator==(const LadderConfig&) const = default;
  /// Throws InputError unless delta > 0, theta_start >= delta, max_rung >= theta_start
  /// and timeout_factor >= 1.
  void validate() const;
};

struct Rung {
  double claimed_bps = 0;
  bool terminated = false;
  std::uint32_t not_terminate_count = 0;
  std::optional<roles::PoBOutput> output;
  netsim::SimResult sim;
};

struct LadderResult {
  double estimate_bps = 0;
  bool below_floor = false;   // the first rung already failed
  bool reached_max = false;   // every rung up to max_rung terminated
  std::vector<Rung> rungs;
};

/// A rung terminates when the verifier produced an output and no more than
/// n/2 of all n challengers declared not_terminate. `base` supplies n, f, the
/// duration, rate policy and derivation options; theta and m0 change per rung.
LadderResult run_ladder(const LadderConfig& config, const netsim::Topology& topology,
                        const schedule::ChallengeParams& base, const adversary::AttackConfig& attack,
                        std::uint64_t seed, netsim::SimOptions options = {});

}  // namespace pob::abw
