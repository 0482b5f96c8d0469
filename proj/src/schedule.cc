#include "pob/schedule.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace pob::schedule {

std::uint32_t ChallengeParams::probes_per_challenger() const { return overprovision_count(k, overprovision); }

double ChallengeParams::probe_interval_ns() const { return static_cast<double>(packet_bytes) * 8.0 / theta0 * 1e9; }

double ChallengeParams::service_time_ns(double rate) const {
  return static_cast<double>(packet_bytes) * 8.0 / rate * 1e9;
}

double ChallengeParams::correction_factor() const {
  return static_cast<double>(n - 2 * f) / static_cast<double>(n - f);
}

ChallengeParams derive_params(double theta_claimed, std::uint32_t n, std::uint32_t f, DurationNs duration,
                              RatePolicy rate_policy, const DeriveOptions& options) {
  if (n < 1) throw InputError("need at least one challenger");
  if (!(theta_claimed > 0)) throw InputError("claimed bandwidth must be positive");
  if (duration <= 0) throw InputError("challenge duration must be positive");
  if (options.overprovision < 1.0) throw InputError("overprovision factor must be at least 1");
  if (options.signatures_per_probe < 1 || options.signatures_per_probe > 22) {
    throw InputError("signatures per probe must be in [1, 22]");
  }
  if (options.verifier_mode == VerifierMode::lazy) {
    if (3ULL * f >= n) {
      throw ThresholdError("f = " + std::to_string(f) + " violates f < n/3 for n = " + std::to_string(n) +
                           " (use the timer verifier for f < n/2)");
    }
  } else if (2ULL * f >= n) {
    throw ThresholdError("f = " + std::to_string(f) + " violates f < n/2 for n = " + std::to_string(n));
  }

  ChallengeParams p;
  p.t0 = options.t0;
  p.m0 = options.m0;
  p.theta_claimed = theta_claimed;
  p.n = n;
  p.f = f;
  p.packet_bytes = options.packet_bytes;
  p.duration = duration;
  p.overprovision = options.overprovision;
  p.rate_policy = rate_policy;
  p.verifier_mode = options.verifier_mode;
  p.signatures_per_probe = options.signatures_per_probe;

  const double m = rate_policy == RatePolicy::per_n ? n : n - f;
  p.theta0 = theta_claimed / m;
  const double exact_k = to_seconds(duration) * theta_claimed / (m * p.packet_bytes * 8.0);
  const double k = std::round(exact_k);
  if (k < 1) {
    throw DurationTooShortError("duration " + std::to_string(duration) + " ns yields k = " + std::to_string(exact_k) +
                                " probes per challenger");
  }
  p.k = static_cast<std::uint32_t>(k);
  return p;
}

std::uint32_t overprovision_count(std::uint32_t k, double rho) {
  if (k < 1) throw InputError("k must be at least 1");
  if (rho < 1.0) throw InputError("rho must be at least 1");
  // 1.1 * 10 is 11.000000000000002 in binary floating point.
  return static_cast<std::uint32_t>(std::ceil(rho * k - 1e-9));
}

TimeNs SendSchedule::send_time(ChallengerId i, std::uint32_t q) const {
  return first_send.at(i) + static_cast<TimeNs>(std::llround((q - 1) * interval_ns));
}

SendSchedule send_schedule(const ChallengeParams& params, std::span<const DurationNs> latencies) {
  if (latencies.size() != params.n) throw InputError("need one latency estimate per challenger");
  if (std::any_of(latencies.begin(), latencies.end(), [](auto l) { return l < 0; })) {
    throw InputError("latencies must be non-negative");
  }
  SendSchedule s;
  s.interval_ns = params.probe_interval_ns();
  s.probes = params.probes_per_challenger();
  s.latency.assign(latencies.begin(), latencies.end());
  const DurationNs reference = latencies.empty() ? 0 : *std::max_element(latencies.begin(), latencies.end());
  s.first_send.reserve(latencies.size());
  for (auto l : latencies) s.first_send.push_back(params.t0 + static_cast<TimeNs>(reference - l));
  return s;
}

DurationNs estimate_latency(std::span<const DurationNs> rtt_samples, LatencyEstimator estimator) {
  if (rtt_samples.empty()) throw InputError("latency estimate needs at least one RTT sample");
  if (estimator == LatencyEstimator::median) {
    std::vector<DurationNs> sorted(rtt_samples.begin(), rtt_samples.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted[sorted.size() / 2] / 2;
  }
  long double sum = 0;
  for (auto v : rtt_samples) sum += v;
  return static_cast<DurationNs>(std::llround(sum / rtt_samples.size() / 2));
}

const char* to_string(RatePolicy p) { return p == RatePolicy::per_n ? "per_n" : "per_n_minus_f"; }

RatePolicy rate_policy_from_string(const std::string& s) {
  if (s == "per_n") return RatePolicy::per_n;
  if (s == "per_n_minus_f") return RatePolicy::per_n_minus_f;
  throw InputError("unknown rate policy '" + s + "'");
}

}  // namespace pob::schedule
