#include <algorithm>
#include <cmath>

#include "pob/roles.h"

namespace pob::roles {

std::uint32_t probe_base_seq(const ChallengeParams& params, std::uint32_t q) {
  return (q - 1) * params.signatures_per_probe + 1;
}

std::uint32_t probe_of_seq(const ChallengeParams& params, std::uint32_t seq) {
  return (seq - 1) / params.signatures_per_probe + 1;
}

std::array<std::uint8_t, 8> challenge_nonce(const ChallengeParams& params) {
  std::array<std::uint8_t, 8> nonce{};
  std::copy_n(params.m0.begin(), nonce.size(), nonce.begin());
  return nonce;
}

const char* to_string(ChallengerPhase p) {
  switch (p) {
    case ChallengerPhase::idle: return "idle";
    case ChallengerPhase::measuring: return "measuring";
    case ChallengerPhase::awaiting_verification: return "awaiting_verification";
    case ChallengerPhase::reported: return "reported";
    case ChallengerPhase::failed: return "failed";
  }
  return "?";
}

Challenger::Challenger(ChallengerId id, crypto::KeyPair keys, ChallengeParams params, TimeNs first_send,
                       DurationNs latency, crypto::PublicKey prover_key, std::uint32_t prover_id)
    : id_(id),
      keys_(keys),
      params_(std::move(params)),
      first_send_(first_send),
      latency_(latency),
      prover_key_(prover_key),
      prover_id_(prover_id) {}

void Challenger::precompute() {
  const std::size_t total = static_cast<std::size_t>(params_.probes_per_challenger()) * params_.signatures_per_probe;
  signatures_.clear();
  signatures_.reserve(total);
  const crypto::Signer signer(keys_.secret_key);
  for (std::size_t s = 1; s <= total; ++s) {
    signatures_.push_back(signer.sign(crypto::probe_message(static_cast<std::uint32_t>(s), params_.m0)));
  }
}

wire::ChallengePacket Challenger::probe_packet(std::uint32_t q) const {
  if (q < 1 || q > params_.probes_per_challenger()) throw InputError("probe index out of range");
  wire::ChallengePacket p;
  p.challenger_id = id_;
  p.base_seq = probe_base_seq(params_, q);
  p.nonce = challenge_nonce(params_);
  const auto first = signatures_.begin() + (p.base_seq - 1);
  p.signatures.assign(first, first + params_.signatures_per_probe);
  return p;
}

ChallengerStart Challenger::start(TimeNs now) {
  if (phase_ != ChallengerPhase::idle) throw InputError("challenger already started");
  precompute();
  ChallengerStart out;
  if (now > first_send_) {
    out.slip = static_cast<DurationNs>(now - first_send_);
    first_send_ = now;
  }
  const std::uint32_t probes = params_.probes_per_challenger();
  const double interval = params_.probe_interval_ns();
  out.sends.reserve(probes);
  for (std::uint32_t q = 1; q <= probes; ++q) {
    const auto at = first_send_ + static_cast<TimeNs>(std::llround((q - 1) * interval));
    out.sends.push_back({at, q, wire::encode(probe_packet(q))});
  }
  phase_ = ChallengerPhase::measuring;
  return out;
}

bool Challenger::on_response(const wire::ResponsePacket& resp, TimeNs now) {
  if (phase_ != ChallengerPhase::measuring || rtt_) return false;
  if (!crypto::verify(prover_key_, crypto::receipt_message(resp.receipt, resp.merkle_root), resp.prover_signature)) {
    return false;
  }
  if (now < first_send_) protocol_violation_ = true;
  rtt_ = static_cast<DurationNs>(now) - static_cast<DurationNs>(first_send_) - 2 * latency_;
  response_ = resp;
  phase_ = ChallengerPhase::awaiting_verification;
  return true;
}

std::vector<crypto::SignedEntry> Challenger::entries_for(const wire::Bitmap& bitmap) const {
  std::vector<crypto::SignedEntry> entries;
  const std::uint32_t per = params_.signatures_per_probe;
  for (std::size_t bit = 0; bit < bitmap.size(); ++bit) {
    if (!bitmap.test(bit)) continue;
    const auto base = probe_base_seq(params_, static_cast<std::uint32_t>(bit + 1));
    for (std::uint32_t j = 0; j < per; ++j) entries.push_back({base + j, signatures_.at(base + j - 1)});
  }
  return entries;
}

std::optional<wire::ChallengerReport> Challenger::on_verification(const wire::VerificationMessage& msg) {
  if (phase_ != ChallengerPhase::awaiting_verification) return std::nullopt;
  if (msg.bitmap.size() != params_.probes_per_challenger()) {
    throw wire::DecodeError("bitmap", "bit count " + std::to_string(msg.bitmap.size()) + " differs from the " +
                                          std::to_string(params_.probes_per_challenger()) + " probes sent");
  }
  wire::ChallengerReport report;
  report.challenger_id = id_;
  report.prover_id = prover_id_;
  report.merkle_root_seen = response_->merkle_root;
  report.rtt_ns = static_cast<std::uint64_t>(std::max<DurationNs>(*rtt_, 1));
  report.packets_acknowledged = static_cast<std::uint32_t>(msg.bitmap.popcount());

  auto fail = [&](std::string reason) {
    failure_reason_ = std::move(reason);
    phase_ = ChallengerPhase::failed;
    report.status = wire::ReportStatus::verification_failed;
    return report;
  };
  if (msg.challenger_id != id_) return fail("verification message addressed to another challenger");
  const auto entries = entries_for(msg.bitmap);
  if (crypto::hash_packet_set(entries) != response_->receipt) return fail("packet set does not hash to the receipt");
  if (msg.merkle_proof.leaf_index != id_) return fail("merkle proof is for another leaf");
  if (!crypto::merkle_verify(response_->merkle_root, response_->receipt, msg.merkle_proof)) {
    return fail("merkle proof does not reach the committed root");
  }
  phase_ = ChallengerPhase::reported;
  return report;
}

bool Challenger::on_timeout(TimeNs /*now*/) {
  if (phase_ == ChallengerPhase::measuring && !rtt_) not_terminate_ = true;
  return not_terminate_;
}

}  // namespace pob::roles
