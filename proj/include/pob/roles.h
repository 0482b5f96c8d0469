#pragma once

// Challenger, prover and verifier state machines for the measurement and
// verification phases. Each is single-threaded and consumes decoded wire
// messages stamped with the time on the role's own clock; none does I/O.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pob/crypto.h"
#include "pob/schedule.h"
#include "pob/types.h"
#include "pob/wire.h"

namespace pob::roles {

using schedule::ChallengeParams;

/// First sequence number carried by probe q (1-based).
std::uint32_t probe_base_seq(const ChallengeParams& params, std::uint32_t q);
/// Probe index (1-based) carrying sequence number `seq`.
std::uint32_t probe_of_seq(const ChallengeParams& params, std::uint32_t seq);
/// The first 8 bytes of m0 tag every probe of a challenge round.
std::array<std::uint8_t, 8> challenge_nonce(const ChallengeParams& params);

// ---------------------------------------------------------------------------
// Challenger

enum class ChallengerPhase { idle, measuring, awaiting_verification, reported, failed };
const char* to_string(ChallengerPhase p);

struct ScheduledSend {
  TimeNs at = 0;  // challenger-local clock
  std::uint32_t probe = 0;
  Bytes packet;
};

struct ChallengerStart {
  std::vector<ScheduledSend> sends;
  DurationNs slip = 0;  // > 0 when start() ran after the first send instant
};

class Challenger {
 public:
  Challenger(ChallengerId id, crypto::KeyPair keys, ChallengeParams params, TimeNs first_send, DurationNs latency,
             crypto::PublicKey prover_key, std::uint32_t prover_id = 0);

  /// Precomputes all signatures and returns one send per probe. If `now` is
  /// already past t_i1 the whole train is shifted and the slip recorded.
  ChallengerStart start(TimeNs now);

  /// Records Delta_i = now - t_i1 - 2 l_i on the first validly signed response.
  bool on_response(const wire::ResponsePacket& resp, TimeNs now);

  /// Rebuilds M from the bitmap and checks it against the receipt and root.
  /// Returns the report to forward to the verifier (status verification_failed
  /// when a check fails). Throws wire::DecodeError if the bitmap length is not
  /// the number of probes this challenger sent.
  std::optional<wire::ChallengerReport> on_verification(const wire::VerificationMessage& msg);

  /// Called at t_i1 + timeout; true if the challenger declares not_terminate.
  bool on_timeout(TimeNs now);

  ChallengerId id() const { return id_; }
  ChallengerPhase phase() const { return phase_; }
  std::optional<DurationNs> rtt() const { return rtt_; }
  TimeNs first_send() const { return first_send_; }
  DurationNs latency() const { return latency_; }
  bool protocol_violation() const { return protocol_violation_; }
  bool declared_not_terminate() const { return not_terminate_; }
  const std::string& failure_reason() const { return failure_reason_; }
  const crypto::KeyPair& keys() const { return keys_; }
  const ChallengeParams& params() const { return params_; }
  const std::vector<crypto::Signature>& signatures() const { return signatures_; }

  /// Probe q as it goes on the wire.
  wire::ChallengePacket probe_packet(std::uint32_t q) const;
  /// The signed entries of every probe whose bit is set.
  std::vector<crypto::SignedEntry> entries_for(const wire::Bitmap& bitmap) const;

 private:
  void precompute();

  ChallengerId id_;
  crypto::KeyPair keys_;
  ChallengeParams params_;
  TimeNs first_send_;
  DurationNs latency_;
  crypto::PublicKey prover_key_;
  std::uint32_t prover_id_;

  ChallengerPhase phase_ = ChallengerPhase::idle;
  std::vector<crypto::Signature> signatures_;  // index seq - 1
  std::optional<DurationNs> rtt_;
  std::optional<wire::ResponsePacket> response_;
  bool protocol_violation_ = false;
  bool not_terminate_ = false;
  std::string failure_reason_;
};

// ---------------------------------------------------------------------------
// Prover

/// Behaviour the network delivers packets to. The honest Prover implements
/// it directly; Byzantine provers wrap a Prover and change when and what it
/// commits to.
class ProverAgent {
 public:
  virtual ~ProverAgent() = default;

  /// Invoked once at t0, before any probe can arrive.
  virtual std::optional<std::vector<wire::ResponsePacket>> on_start(TimeNs now);
  /// Returns one response per challenger (indexed by id) when committing.
  virtual std::optional<std::vector<wire::ResponsePacket>> on_packet(const wire::ChallengePacket& packet,
                                                                     TimeNs now) = 0;
  virtual std::vector<wire::VerificationMessage> verification_messages() const = 0;
  virtual wire::ProverReport report() const = 0;
  virtual std::optional<wire::DisputeSubmission> on_dispute_request(ChallengerId id) const = 0;
  virtual bool responded() const = 0;
  virtual std::uint64_t total_count() const = 0;
};

enum class InsertResult { accepted, duplicate, unknown_challenger, foreign_challenge, malformed, after_response };

/// Schedule conformance for the honest prover's termination count: probe q of
/// any challenger only counts once `reference + (q-1)*interval - slack` has
/// passed, where `reference` is the aligned first-arrival instant t0 + max l_i.
/// Probes that arrive ahead of schedule (a burst over a side link) are held
/// back until their nominal instant and are not committed before it.
struct AdmissionPolicy {
  bool enabled = false;
  TimeNs reference = 0;
  DurationNs slack = 0;
};

class Prover : public ProverAgent {
 public:
  Prover(crypto::KeyPair keys, ChallengeParams params, std::uint32_t prover_id = 0, AdmissionPolicy admission = {});

  // Honest behaviour.
  std::optional<std::vector<wire::ResponsePacket>> on_packet(const wire::ChallengePacket& packet, TimeNs now) override;
  std::vector<wire::VerificationMessage> verification_messages() const override;
  wire::ProverReport report() const override;
  std::optional<wire::DisputeSubmission> on_dispute_request(ChallengerId id) const override;
  bool responded() const override { return responded_; }
  std::uint64_t total_count() const override { return total_; }

  // Mechanics shared with adversarial provers.
  InsertResult insert(const wire::ChallengePacket& packet);
  /// Commits to the current sets: receipts, root and one signed response each.
  std::vector<wire::ResponsePacket> respond();
  /// Drops all but the `max_probes` lowest-numbered probes from challenger i.
  void truncate(ChallengerId i, std::uint32_t max_probes);
  /// Probes per challenger that the admission policy lets count at `now`.
  std::uint64_t nominal_count(TimeNs now) const;
  /// Sum over challengers of min(count, nominal_count(now)).
  std::uint64_t admitted_total(TimeNs now) const;

  std::uint32_t count(ChallengerId i) const;
  std::vector<crypto::SignedEntry> entries(ChallengerId i) const;
  wire::Bitmap bitmap(ChallengerId i) const;
  const std::vector<crypto::Digest>& receipts() const { return receipts_; }
  const crypto::Digest& root() const { return root_; }
  std::uint64_t duplicates() const { return duplicates_; }
  std::uint64_t dropped() const { return dropped_; }
  const ChallengeParams& params() const { return params_; }
  const crypto::PublicKey& public_key() const { return keys_.public_key; }

 private:
  crypto::KeyPair keys_;
  ChallengeParams params_;
  std::uint32_t prover_id_;
  AdmissionPolicy admission_;
  std::array<std::uint8_t, 8> nonce_;
  // received_[i][q] holds the signatures carried by probe q of challenger i.
  std::vector<std::map<std::uint32_t, std::vector<crypto::Signature>>> received_;
  // prefix_[i] has absorbed probes 1..p of challenger i in order, so the
  // receipt of an unbroken prefix needs no rehash at commit time.
  std::vector<crypto::PacketSetHasher> prefix_;
  std::vector<std::uint32_t> prefix_probes_;
  std::uint64_t total_ = 0;
  bool responded_ = false;
  std::vector<crypto::Digest> receipts_;
  crypto::Digest root_;
  std::uint64_t duplicates_ = 0;
  std::uint64_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// Verifier

struct PoBOutput {
  double measured_bps = 0;
  DurationNs delta_median = 0;
  double guaranteed_bps = 0;
  std::uint32_t accepted_reports = 0;
  std::uint64_t cnt = 0;
  bool operator==(const PoBOutput&) const = default;
};

enum class ReportVerdict {
  accepted,
  buffered,  // prover root not yet known
  rejected_root,
  rejected_duplicate,
  rejected_status,
  rejected_count,
  rejected_unknown_challenger,
  ignored_after_output,
};
const char* to_string(ReportVerdict v);

enum class DisputeOutcome { prover_upheld, prover_rejected };
const char* to_string(DisputeOutcome o);

/// Upper median: element floor(m/2) of the sorted values. Throws on empty input.
DurationNs median(std::span<const DurationNs> values);

/// measured = cnt*b*8/delta, guaranteed = measured*(n-2f)/(n-f).
PoBOutput compute_output(const ChallengeParams& params, std::uint64_t cnt, std::span<const DurationNs> deltas);

class Verifier {
 public:
  Verifier(ChallengeParams params, std::vector<crypto::PublicKey> challenger_keys, std::uint32_t prover_id = 0);

  std::optional<PoBOutput> on_prover_report(const wire::ProverReport& report);
  std::optional<PoBOutput> on_report(const wire::ChallengerReport& report);

  /// Challengers owed a dispute: anyone who complained or whose report was
  /// rejected, plus, while no output exists, anyone who has not reported.
  std::vector<ChallengerId> dispute_candidates() const;
  DisputeOutcome resolve_dispute(const wire::DisputeSubmission& submission);
  /// Closes collection: emits the output if the thresholds are met.
  std::optional<PoBOutput> on_deadline(TimeNs now);

  const std::optional<PoBOutput>& output() const { return output_; }
  std::uint64_t cnt() const { return cnt_; }
  std::size_t accepted_reports() const { return deltas_.size(); }
  ReportVerdict last_verdict() const { return last_verdict_; }
  const std::vector<std::string>& log() const { return log_; }
  std::optional<crypto::Digest> prover_root() const { return prover_root_; }
  /// Probes added to cnt per challenger, through a report or an upheld dispute.
  const std::map<ChallengerId, std::uint32_t>& counted() const { return counted_; }
  /// Final verdict on each challenger's report.
  const std::map<ChallengerId, ReportVerdict>& verdicts() const { return verdicts_; }

 private:
  ReportVerdict accept(const wire::ChallengerReport& report);
  std::optional<PoBOutput> try_output(bool deadline);

  ChallengeParams params_;
  std::vector<crypto::PublicKey> keys_;
  std::uint32_t prover_id_;
  std::optional<crypto::Digest> prover_root_;
  std::vector<std::uint32_t> prover_acknowledged_;
  std::vector<wire::ChallengerReport> buffered_;
  std::map<ChallengerId, DurationNs> deltas_;
  std::set<ChallengerId> reported_;    // any report seen
  std::set<ChallengerId> complaints_;  // failed or rejected reports
  std::set<ChallengerId> disputed_;
  std::uint64_t cnt_ = 0;
  std::map<ChallengerId, std::uint32_t> counted_;
  std::map<ChallengerId, ReportVerdict> verdicts_;
  std::optional<PoBOutput> output_;
  ReportVerdict last_verdict_ = ReportVerdict::buffered;
  std::vector<std::string> log_;
};

}  // namespace pob::roles
