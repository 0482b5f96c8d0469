#include <algorithm>
#include <map>

#include "pob/roles.h"

namespace pob::roles {

const char* to_string(ReportVerdict v) {
  switch (v) {
    case ReportVerdict::accepted: return "accepted";
    case ReportVerdict::buffered: return "buffered";
    case ReportVerdict::rejected_root: return "rejected_root";
    case ReportVerdict::rejected_duplicate: return "rejected_duplicate";
    case ReportVerdict::rejected_status: return "rejected_status";
    case ReportVerdict::rejected_count: return "rejected_count";
    case ReportVerdict::rejected_unknown_challenger: return "rejected_unknown_challenger";
    case ReportVerdict::ignored_after_output: return "ignored_after_output";
  }
  return "?";
}

const char* to_string(DisputeOutcome o) {
  return o == DisputeOutcome::prover_upheld ? "prover_upheld" : "prover_rejected";
}

DurationNs median(std::span<const DurationNs> values) {
  if (values.empty()) throw InputError("median of an empty set");
  std::vector<DurationNs> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[sorted.size() / 2];
}

PoBOutput compute_output(const ChallengeParams& params, std::uint64_t cnt, std::span<const DurationNs> deltas) {
  PoBOutput out;
  out.delta_median = median(deltas);
  if (out.delta_median <= 0) throw InputError("median round-trip time must be positive");
  out.cnt = cnt;
  out.accepted_reports = static_cast<std::uint32_t>(deltas.size());
  out.measured_bps = static_cast<double>(cnt) * params.packet_bytes * 8.0 / to_seconds(out.delta_median);
  out.guaranteed_bps = out.measured_bps * params.correction_factor();
  return out;
}

Verifier::Verifier(ChallengeParams params, std::vector<crypto::PublicKey> challenger_keys, std::uint32_t prover_id)
    : params_(std::move(params)), keys_(std::move(challenger_keys)), prover_id_(prover_id) {
  if (keys_.size() != params_.n) throw InputError("verifier needs one public key per challenger");
}

std::optional<PoBOutput> Verifier::on_prover_report(const wire::ProverReport& report) {
  if (prover_root_) {
    log_.push_back("ignored repeated prover report");
    return std::nullopt;
  }
  if (report.prover_id != prover_id_ || report.acknowledged.size() != params_.n) {
    log_.push_back("ignored malformed prover report");
    return std::nullopt;
  }
  prover_root_ = report.merkle_root;
  prover_acknowledged_ = report.acknowledged;
  auto pending = std::move(buffered_);
  buffered_.clear();
  for (const auto& r : pending) accept(r);
  return try_output(false);
}

std::optional<PoBOutput> Verifier::on_report(const wire::ChallengerReport& report) {
  if (output_) {
    if (report.status != wire::ReportStatus::ok && report.challenger_id < params_.n) {
      complaints_.insert(report.challenger_id);
    }
    last_verdict_ = ReportVerdict::ignored_after_output;
    if (report.challenger_id < params_.n) verdicts_.try_emplace(report.challenger_id, last_verdict_);
    return std::nullopt;
  }
  if (!prover_root_) {
    buffered_.push_back(report);
    last_verdict_ = ReportVerdict::buffered;
    if (report.challenger_id < params_.n) verdicts_.try_emplace(report.challenger_id, last_verdict_);
    return std::nullopt;
  }
  accept(report);
  return try_output(false);
}

ReportVerdict Verifier::accept(const wire::ChallengerReport& report) {
  const auto id = report.challenger_id;
  const auto verdict = [&]() {
    if (id >= params_.n || report.prover_id != prover_id_) return ReportVerdict::rejected_unknown_challenger;
    if (reported_.contains(id)) return ReportVerdict::rejected_duplicate;
    reported_.insert(id);
    if (report.status != wire::ReportStatus::ok || report.rtt_ns == 0) {
      complaints_.insert(id);
      return ReportVerdict::rejected_status;
    }
    if (report.merkle_root_seen != *prover_root_) {
      complaints_.insert(id);
      return ReportVerdict::rejected_root;
    }
    if (report.packets_acknowledged != prover_acknowledged_[id]) {
      complaints_.insert(id);
      return ReportVerdict::rejected_count;
    }
    deltas_[id] = static_cast<DurationNs>(std::min<std::uint64_t>(report.rtt_ns, INT64_MAX));
    cnt_ += report.packets_acknowledged;
    counted_[id] = report.packets_acknowledged;
    return ReportVerdict::accepted;
  }();
  if (verdict != ReportVerdict::accepted) {
    log_.push_back("report from challenger " + std::to_string(id) + ": " + to_string(verdict));
  }
  last_verdict_ = verdict;
  if (id < params_.n && verdict != ReportVerdict::rejected_duplicate) verdicts_[id] = verdict;
  return verdict;
}

std::optional<PoBOutput> Verifier::try_output(bool deadline) {
  if (output_) return std::nullopt;
  if (params_.verifier_mode == schedule::VerifierMode::timer && !deadline) return std::nullopt;
  if (cnt_ < params_.threshold() || deltas_.size() < params_.n - params_.f) return std::nullopt;
  std::vector<DurationNs> values;
  values.reserve(deltas_.size());
  for (const auto& [id, d] : deltas_) values.push_back(d);
  output_ = compute_output(params_, cnt_, values);
  return output_;
}

std::vector<ChallengerId> Verifier::dispute_candidates() const {
  std::vector<ChallengerId> out;
  for (ChallengerId i = 0; i < params_.n; ++i) {
    if (disputed_.contains(i) || deltas_.contains(i)) continue;
    if (complaints_.contains(i) || !output_) out.push_back(i);
  }
  return out;
}

DisputeOutcome Verifier::resolve_dispute(const wire::DisputeSubmission& submission) {
  const auto id = submission.challenger_id;
  const auto reject = [&](const std::string& why) {
    log_.push_back("dispute for challenger " + std::to_string(id) + " rejected: " + why);
    return DisputeOutcome::prover_rejected;
  };
  if (id >= params_.n) return reject("unknown challenger");
  if (!prover_root_) return reject("prover never committed a root");
  if (deltas_.contains(id)) return reject("challenger already counted");
  if (disputed_.contains(id)) return reject("challenger already disputed");
  disputed_.insert(id);
  if (submission.merkle_proof.leaf_index != id) return reject("proof addresses another leaf");

  crypto::Digest leaf;
  try {
    leaf = crypto::hash_packet_set(submission.packets);
  } catch (const InputError&) {
    return reject("packet set repeats a sequence number");
  }
  if (!crypto::merkle_verify(*prover_root_, leaf, submission.merkle_proof)) return reject("packets are not the committed leaf");

  std::map<std::uint32_t, std::uint32_t> per_probe;
  const std::uint64_t max_seq = static_cast<std::uint64_t>(params_.probes_per_challenger()) * params_.signatures_per_probe;
  for (const auto& e : submission.packets) {
    if (e.seq == 0 || e.seq > max_seq) return reject("sequence number outside the challenge");
    if (!crypto::verify(keys_[id], crypto::probe_message(e.seq, params_.m0), e.signature)) {
      return reject("signature for sequence " + std::to_string(e.seq) + " does not verify");
    }
    ++per_probe[probe_of_seq(params_, e.seq)];
  }
  for (const auto& [q, n] : per_probe) {
    if (n != params_.signatures_per_probe) return reject("probe " + std::to_string(q) + " is incomplete");
  }
  const auto probes = static_cast<std::uint32_t>(per_probe.size());
  if (probes != prover_acknowledged_[id]) return reject("probe count differs from the prover's report");
  cnt_ += probes;
  counted_[id] = probes;
  log_.push_back("dispute for challenger " + std::to_string(id) + " upheld with " + std::to_string(probes) + " probes");
  return DisputeOutcome::prover_upheld;
}

std::optional<PoBOutput> Verifier::on_deadline(TimeNs /*now*/) { return try_output(true); }

}  // namespace pob::roles
