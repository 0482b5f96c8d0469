#pragma once

// Discrete-event simulation of one challenge round. Challengers, prover and
// verifier are the real role state machines; packets cross the simulated
// access links and the prover's drop-tail backhaul as encoded wire bytes.

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pob/adversary.h"
#include "pob/random.h"
#include "pob/roles.h"
#include "pob/schedule.h"
#include "pob/topology.h"

namespace pob::netsim {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Events run in (time, insertion order).
class EventLoop {
 public:
  void at(TimeNs t, std::function<void()> fn);
  /// Runs every event with time <= horizon; returns the number processed.
  std::uint64_t run(TimeNs horizon);
  TimeNs now() const { return now_; }
  bool empty() const { return queue_.empty(); }

 private:
  struct Event {
    TimeNs time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  TimeNs now_ = 0;
};

struct TraceRecord {
  TimeNs time = 0;
  std::string node;
  std::string event;
  std::string detail;
};

struct DropStats {
  std::uint64_t backhaul_queue = 0;
  std::uint64_t uplink_queue = 0;
  std::uint64_t loss = 0;
  std::uint64_t withheld = 0;  // probes a corrupt challenger chose not to send
  std::uint64_t total() const { return backhaul_queue + uplink_queue + loss; }
  bool operator==(const DropStats&) const = default;
};

struct ChallengerOutcome {
  ChallengerId id = 0;
  bool corrupt = false;
  DurationNs clock_offset = 0;
  DurationNs latency = 0;  // estimated l_i
  DurationNs slip = 0;
  std::uint32_t probes_sent = 0;
  std::optional<DurationNs> delta;
  /// Probes the verifier added to cnt on this challenger's behalf.
  std::uint32_t counted = 0;
  std::string phase;
  bool not_terminate = false;
  std::string verdict;  // verifier's treatment of the report, empty if none arrived
};

struct SimOptions {
  /// Offsets from t0; 0 selects a default derived from the challenge duration.
  DurationNs challenger_timeout = 0;  // measured from t_i1
  DurationNs verifier_deadline = 0;
  DurationNs horizon = 0;
  double timeout_factor = 5;
  bool record_trace = true;
  std::uint32_t ping_count = 20;
  schedule::LatencyEstimator estimator = schedule::LatencyEstimator::mean;
};

struct SimResult {
  schedule::ChallengeParams params;
  std::optional<roles::PoBOutput> output;
  bool terminated = false;  // the verifier produced an output before the horizon
  std::optional<TimeNs> response_time;
  std::uint32_t not_terminate_count = 0;
  std::vector<ChallengerOutcome> challengers;
  DropStats drops;
  std::uint64_t challenge_bytes = 0;  // on-wire bytes of every probe challengers sent
  std::uint64_t backhaul_bytes = 0;   // bytes the backhaul delivered to the prover
  std::vector<std::pair<ChallengerId, roles::DisputeOutcome>> disputes;
  std::vector<std::string> verifier_log;
  std::vector<TraceRecord> trace;

  /// More than n/2 of all challengers declared not_terminate.
  bool majority_not_terminate() const { return not_terminate_count * 2 > params.n; }
  /// One line per record: "<time_ns> <node> <event> <detail>".
  std::string trace_text() const;
};

struct RoundKeys {
  std::vector<crypto::KeyPair> challengers;
  crypto::KeyPair prover;
};
/// Challenger keys 0..n-1, then the prover's, from the seed's key substream.
RoundKeys derive_keys(std::uint64_t seed, std::uint32_t n);

/// Runs one round. `params.n` must equal the number of uplinks.
SimResult run_scenario(const Topology& topology, const schedule::ChallengeParams& params,
                       const adversary::AttackConfig& attack, std::uint64_t seed, const SimOptions& options = {});

/// RTT samples for `count` pings from challenger `challenger` to the prover.
/// Lost pings are left out; throws SimError if every ping is lost.
std::vector<DurationNs> ping(const Topology& topology, ChallengerId challenger, std::uint32_t count, Rng& rng);

/// Time for `bytes` to cross a link of `rate_bps`, rounded to the nanosecond.
DurationNs serialization_ns(std::uint64_t bytes, double rate_bps);

}  // namespace pob::netsim
