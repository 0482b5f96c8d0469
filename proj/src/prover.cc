#include <algorithm>

#include "pob/roles.h"

namespace pob::roles {

std::optional<std::vector<wire::ResponsePacket>> ProverAgent::on_start(TimeNs /*now*/) { return std::nullopt; }

Prover::Prover(crypto::KeyPair keys, ChallengeParams params, std::uint32_t prover_id, AdmissionPolicy admission)
    : keys_(keys),
      params_(std::move(params)),
      prover_id_(prover_id),
      admission_(admission),
      nonce_(challenge_nonce(params_)) {
  received_.resize(params_.n);
  prefix_.resize(params_.n);
  prefix_probes_.resize(params_.n, 0);
}

InsertResult Prover::insert(const wire::ChallengePacket& packet) {
  const auto reject = [this](InsertResult r) {
    ++dropped_;
    return r;
  };
  if (responded_) return reject(InsertResult::after_response);
  if (packet.challenger_id >= params_.n) return reject(InsertResult::unknown_challenger);
  if (packet.nonce != nonce_) return reject(InsertResult::foreign_challenge);
  const auto per = params_.signatures_per_probe;
  if (packet.base_seq == 0 || packet.signatures.size() != per || (packet.base_seq - 1) % per != 0) {
    return reject(InsertResult::malformed);
  }
  const auto q = probe_of_seq(params_, packet.base_seq);
  if (q > params_.probes_per_challenger()) return reject(InsertResult::malformed);
  auto& probes = received_[packet.challenger_id];
  if (probes.contains(q)) {
    ++duplicates_;
    return InsertResult::duplicate;
  }
  probes.emplace(q, packet.signatures);
  ++total_;
  auto& p = prefix_probes_[packet.challenger_id];
  for (auto it = probes.find(p + 1); it != probes.end() && it->first == p + 1; ++it, ++p) {
    const auto base = probe_base_seq(params_, it->first);
    for (std::uint32_t j = 0; j < it->second.size(); ++j) prefix_[packet.challenger_id].add(base + j, it->second[j]);
  }
  return InsertResult::accepted;
}

std::optional<std::vector<wire::ResponsePacket>> Prover::on_packet(const wire::ChallengePacket& packet, TimeNs now) {
  if (insert(packet) != InsertResult::accepted) return std::nullopt;
  if (total_ < params_.threshold()) return std::nullopt;
  if (!admission_.enabled) return respond();
  if (admitted_total(now) < params_.threshold()) return std::nullopt;
  const auto nominal = nominal_count(now);
  for (ChallengerId i = 0; i < params_.n; ++i) truncate(i, static_cast<std::uint32_t>(std::min<std::uint64_t>(nominal, count(i))));
  return respond();
}

std::uint64_t Prover::nominal_count(TimeNs now) const {
  if (!admission_.enabled) return params_.probes_per_challenger();
  const auto elapsed = static_cast<double>(static_cast<DurationNs>(now) - static_cast<DurationNs>(admission_.reference) +
                                           admission_.slack);
  if (elapsed < 0) return 0;
  const auto n = static_cast<std::uint64_t>(elapsed / params_.probe_interval_ns()) + 1;
  return std::min<std::uint64_t>(n, params_.probes_per_challenger());
}

std::uint64_t Prover::admitted_total(TimeNs now) const {
  const auto nominal = nominal_count(now);
  std::uint64_t sum = 0;
  for (const auto& probes : received_) sum += std::min<std::uint64_t>(probes.size(), nominal);
  return sum;
}

std::vector<wire::ResponsePacket> Prover::respond() {
  if (responded_) throw InputError("prover already committed its response");
  receipts_.clear();
  receipts_.reserve(params_.n);
  for (ChallengerId i = 0; i < params_.n; ++i) {
    if (prefix_probes_[i] == count(i)) {
      receipts_.push_back(prefix_[i].digest());
    } else {
      receipts_.push_back(crypto::hash_packet_set(entries(i)));
    }
  }
  root_ = crypto::merkle_root(receipts_);
  std::vector<wire::ResponsePacket> out;
  out.reserve(params_.n);
  for (const auto& receipt : receipts_) {
    out.push_back({receipt, root_, crypto::sign(keys_.secret_key, crypto::receipt_message(receipt, root_))});
  }
  responded_ = true;
  return out;
}

void Prover::truncate(ChallengerId i, std::uint32_t max_probes) {
  auto& probes = received_.at(i);
  while (probes.size() > max_probes) {
    probes.erase(std::prev(probes.end()));
    --total_;
  }
}

std::uint32_t Prover::count(ChallengerId i) const { return static_cast<std::uint32_t>(received_.at(i).size()); }

std::vector<crypto::SignedEntry> Prover::entries(ChallengerId i) const {
  std::vector<crypto::SignedEntry> out;
  for (const auto& [q, sigs] : received_.at(i)) {
    const auto base = probe_base_seq(params_, q);
    for (std::uint32_t j = 0; j < sigs.size(); ++j) out.push_back({base + j, sigs[j]});
  }
  return out;
}

wire::Bitmap Prover::bitmap(ChallengerId i) const {
  wire::Bitmap bm(params_.probes_per_challenger());
  for (const auto& entry : received_.at(i)) bm.set(entry.first - 1);
  return bm;
}

std::vector<wire::VerificationMessage> Prover::verification_messages() const {
  if (!responded_) throw InputError("verification phase starts after the response");
  std::vector<wire::VerificationMessage> out;
  out.reserve(params_.n);
  for (ChallengerId i = 0; i < params_.n; ++i) out.push_back({i, bitmap(i), crypto::merkle_prove(receipts_, i)});
  return out;
}

wire::ProverReport Prover::report() const {
  wire::ProverReport r;
  r.prover_id = prover_id_;
  r.merkle_root = root_;
  r.acknowledged.reserve(params_.n);
  for (ChallengerId i = 0; i < params_.n; ++i) r.acknowledged.push_back(count(i));
  return r;
}

std::optional<wire::DisputeSubmission> Prover::on_dispute_request(ChallengerId id) const {
  if (!responded_ || id >= params_.n) return std::nullopt;
  return wire::DisputeSubmission{id, entries(id), crypto::merkle_prove(receipts_, id)};
}

}  // namespace pob::roles
