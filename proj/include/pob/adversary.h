#pragma once

// Byzantine behaviour for challengers and the prover. A static adversary picks
// its corrupt set and strategies before the run; `apply` turns that into
// per-challenger send/report plans and the prover agent the simulator drives.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pob/crypto.h"
#include "pob/roles.h"
#include "pob/schedule.h"
#include "pob/topology.h"

namespace pob::adversary {

enum class ChallengerStrategy {
  withhold_all,       // never sends; still reports unless `still_reports` is false
  withhold_fraction,  // drops each probe with probability `value`
  delay,              // shifts the whole train by `value` ns
  rush,               // bursts every probe at t_i1 over its side channel
  share_keys,         // hands its key to the prover instead of sending
  misreport_rtt,      // reports rtt = `value` ns
  misreport_count,    // reports packets_acknowledged = `value`
  withhold_report,    // measures honestly, never reports
  bad_merkle_claim,   // reports verification_failed despite a valid proof
};
const char* to_string(ChallengerStrategy s);
ChallengerStrategy challenger_strategy_from_string(const std::string& s);

enum class ProverStrategy {
  honest,
  colluding,       // counts corrupt challengers' probes (up to a quota) toward its threshold
  dispute_forger,  // measures honestly, over-reports counts and forges dispute packets
};
const char* to_string(ProverStrategy s);
ProverStrategy prover_strategy_from_string(const std::string& s);

struct CorruptChallenger {
  ChallengerId id = 0;
  ChallengerStrategy strategy = ChallengerStrategy::withhold_all;
  double value = 0;
  bool still_reports = true;
  bool operator==(const CorruptChallenger&) const = default;
};

struct AttackConfig {
  std::vector<CorruptChallenger> corrupt;
  ProverStrategy prover = ProverStrategy::honest;
  /// Colluding prover: respond as soon as the quota-capped count reaches the
  /// threshold. When false it waits for the plain count like an honest prover.
  bool early_response = true;
  /// Colluding prover: most probes acknowledged per corrupt challenger; 0 means k.
  std::uint32_t ack_quota = 0;

  std::set<ChallengerId> corrupt_ids() const;
  const CorruptChallenger* find(ChallengerId id) const;
  /// Throws InputError if ids repeat, exceed n, number more than f, or a
  /// rushing challenger has no side channel in `topology`.
  void validate(const schedule::ChallengeParams& params, const netsim::Topology& topology) const;
  bool operator==(const AttackConfig&) const = default;
};

/// How one challenger deviates from the honest send and report behaviour.
struct ChallengerPlan {
  bool corrupt = false;
  bool sends = true;
  double drop_fraction = 0;
  DurationNs send_delay = 0;
  bool side_channel = false;
  bool burst = false;
  bool reports = true;
  std::optional<std::uint64_t> rtt_override;
  std::optional<std::uint32_t> count_override;
  bool claim_failure = false;
};

struct Instrumented {
  std::vector<ChallengerPlan> plans;
  std::unique_ptr<roles::ProverAgent> prover;
};

/// Builds plans and the prover agent. `admission` applies to provers that
/// follow the honest termination rule.
Instrumented apply(const AttackConfig& attack, const schedule::ChallengeParams& params,
                   const netsim::Topology& topology, std::span<const crypto::KeyPair> challenger_keys,
                   const crypto::KeyPair& prover_keys, roles::AdmissionPolicy admission, std::uint32_t prover_id = 0);

/// Random static adversary with exactly f corrupt challengers. f = 0 yields the
/// honest baseline.
AttackConfig fuzz_strategies(std::uint64_t seed, std::uint32_t n, std::uint32_t f);

// Prover agents ------------------------------------------------------------

class ColludingProver : public roles::ProverAgent {
 public:
  ColludingProver(crypto::KeyPair keys, schedule::ChallengeParams params, std::uint32_t prover_id,
                  std::set<ChallengerId> corrupt, std::vector<crypto::KeyPair> shared_keys,
                  std::vector<ChallengerId> shared_ids, std::uint32_t quota, bool early_response);

  std::optional<std::vector<wire::ResponsePacket>> on_start(TimeNs now) override;
  std::optional<std::vector<wire::ResponsePacket>> on_packet(const wire::ChallengePacket& packet, TimeNs now) override;
  std::vector<wire::VerificationMessage> verification_messages() const override { return inner_.verification_messages(); }
  wire::ProverReport report() const override { return inner_.report(); }
  std::optional<wire::DisputeSubmission> on_dispute_request(ChallengerId id) const override {
    return inner_.on_dispute_request(id);
  }
  bool responded() const override { return inner_.responded(); }
  std::uint64_t total_count() const override { return inner_.total_count(); }

  /// Honest probes plus min(count, quota) for each corrupt challenger.
  std::uint64_t usable_count() const;

 private:
  std::optional<std::vector<wire::ResponsePacket>> maybe_respond();

  roles::Prover inner_;
  schedule::ChallengeParams params_;
  std::set<ChallengerId> corrupt_;
  std::vector<crypto::KeyPair> shared_keys_;
  std::vector<ChallengerId> shared_ids_;
  std::uint32_t quota_;
  bool early_response_;
};

class DisputeForger : public roles::Prover {
 public:
  using roles::Prover::Prover;
  wire::ProverReport report() const override;
  std::optional<wire::DisputeSubmission> on_dispute_request(ChallengerId id) const override;
};

}  // namespace pob::adversary
