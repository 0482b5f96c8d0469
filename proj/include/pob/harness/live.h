#pragma once

// Live mode: the role state machines over UDP sockets with wall-clock timers.
//
// Every role reads the same scenario file. Keys come from live.key_seed, the
// challenge nonce from (key_seed, t0), so no key distribution step is needed.
// Timestamps are a monotonic clock anchored once to the wall clock: schedules
// against t0 use the anchor, Δ_i is a difference of monotonic readings.
//
// Messages use the wire encodings, one per datagram. Anything longer than
// kMaxDatagram (a dispute submission carries every signature of a challenger)
// is split into fragments: [0xF0, 1, 0, 0, message_id u32, index u16, count u16, chunk].
//
// The prover's egress shaper (live.shaper_mbps > 0) is a user-space drop-tail
// queue in front of the prover logic: challenge packets leave it at the shaped
// rate and are dropped when live.shaper_queue_bytes would be exceeded. Pings
// bypass it.

#include <stdexcept>
#include <string>

#include "pob/harness/config.h"
#include "pob/harness/report.h"

namespace pob::harness::live {

inline constexpr std::size_t kMaxDatagram = 60000;

/// Socket, peer or timing failure during a live run.
class LiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Role { challenger, prover, verifier };
Role role_from_string(const std::string& s);

struct RoleOptions {
  Role role = Role::verifier;
  std::string listen;  // empty: the role's address from the live section
  std::string peer;    // challenger: prover address override
  TimeNs t0 = 0;       // 0: resolve_t0(config)
};

/// live.t0_unix_ms when set; otherwise the next 10 s wall-clock boundary at
/// least 3 s away, so roles started together agree without coordination.
TimeNs resolve_t0(const ScenarioConfig& config);

/// Runs one role until it finishes. A challenger finds its id by matching
/// `listen` against live.challengers. Throws ConfigError for unusable
/// configurations (including lazy mode with f >= n/3) and LiveError at run time.
RunReport run_role(const ScenarioConfig& config, const RoleOptions& options);

/// Verifier, prover and every challenger as threads of this process on the
/// configured addresses; returns the verifier's report.
RunReport run_local(const ScenarioConfig& config);

}  // namespace pob::harness::live
