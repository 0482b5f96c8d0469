#pragma once

// Public challenge parameters and per-challenger send schedules.
//
// The unit of accounting is the probe: one 1514-byte challenge packet. k, the
// prover's termination threshold and the verifier's cnt all count probes. A
// probe carries `signatures_per_probe` signatures over consecutive sequence
// numbers, so probe q (1-based) covers sequence numbers (q-1)*S+1 .. q*S.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pob/types.h"

namespace pob::schedule {

enum class RatePolicy { per_n, per_n_minus_f };

/// How the verifier closes report collection.
enum class VerifierMode {
  lazy,   // responsive; requires f < n/3
  timer,  // waits for a deadline; tolerates f < n/2
};

struct ChallengeParams {
  TimeNs t0 = 0;
  std::array<std::uint8_t, 32> m0{};
  double theta_claimed = 0;  // bits/s
  double theta0 = 0;         // per-challenger send rate, bits/s
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t k = 0;
  std::uint32_t packet_bytes = 1514;
  DurationNs duration = 0;
  double overprovision = 1.10;
  RatePolicy rate_policy = RatePolicy::per_n_minus_f;
  VerifierMode verifier_mode = VerifierMode::lazy;
  std::uint32_t signatures_per_probe = 22;

  /// (n - f) * k probes.
  std::uint64_t threshold() const { return static_cast<std::uint64_t>(n - f) * k; }
  /// ceil(rho * k): probes each challenger transmits.
  std::uint32_t probes_per_challenger() const;
  /// Spacing between consecutive probes of one challenger, b*8/theta0.
  double probe_interval_ns() const;
  /// Time one probe occupies a link of `rate` bits/s.
  double service_time_ns(double rate) const;
  /// (n - 2f) / (n - f).
  double correction_factor() const;

  bool operator==(const ChallengeParams&) const = default;
};

struct DeriveOptions {
  TimeNs t0 = 1'000'000'000;
  std::array<std::uint8_t, 32> m0{};
  double overprovision = 1.10;
  VerifierMode verifier_mode = VerifierMode::lazy;
  std::uint32_t signatures_per_probe = 22;
  std::uint32_t packet_bytes = 1514;
};

/// Adversary bound violated for the selected verifier mode.
class ThresholdError : public InputError {
 public:
  using InputError::InputError;
};

/// The requested duration rounds to fewer than one probe per challenger.
class DurationTooShortError : public InputError {
 public:
  using InputError::InputError;
};

/// theta0 = theta_claimed / m with m = n or n - f; k = round(D * theta / (m * b * 8)).
ChallengeParams derive_params(double theta_claimed, std::uint32_t n, std::uint32_t f, DurationNs duration,
                              RatePolicy rate_policy, const DeriveOptions& options = {});

/// ceil(rho * k), robust to floating-point noise in rho * k.
std::uint32_t overprovision_count(std::uint32_t k, double rho);

struct SendSchedule {
  std::vector<TimeNs> first_send;  // t_i1
  std::vector<DurationNs> latency;  // l_i
  double interval_ns = 0;
  std::uint32_t probes = 0;

  /// Local-clock send instant of probe q (1-based) for challenger i.
  TimeNs send_time(ChallengerId i, std::uint32_t q) const;
};

/// Aligns first arrivals: t_i1 = t0 + (max_j l_j - l_i).
SendSchedule send_schedule(const ChallengeParams& params, std::span<const DurationNs> latencies);

enum class LatencyEstimator { mean, median };

/// One-way latency as half the mean (or median) round-trip time.
DurationNs estimate_latency(std::span<const DurationNs> rtt_samples, LatencyEstimator estimator = LatencyEstimator::mean);

const char* to_string(RatePolicy p);
RatePolicy rate_policy_from_string(const std::string& s);

}  // namespace pob::schedule
