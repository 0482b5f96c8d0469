#include <algorithm>
#include <cmath>

#include "pob/adversary.h"
#include "pob/random.h"

namespace pob::adversary {

namespace {

constexpr std::array<std::pair<ChallengerStrategy, const char*>, 9> kChallengerNames{{
    {ChallengerStrategy::withhold_all, "withhold_all"},
    {ChallengerStrategy::withhold_fraction, "withhold_fraction"},
    {ChallengerStrategy::delay, "delay"},
    {ChallengerStrategy::rush, "rush"},
    {ChallengerStrategy::share_keys, "share_keys"},
    {ChallengerStrategy::misreport_rtt, "misreport_rtt"},
    {ChallengerStrategy::misreport_count, "misreport_count"},
    {ChallengerStrategy::withhold_report, "withhold_report"},
    {ChallengerStrategy::bad_merkle_claim, "bad_merkle_claim"},
}};

}  // namespace

const char* to_string(ChallengerStrategy s) {
  for (const auto& [k, name] : kChallengerNames) {
    if (k == s) return name;
  }
  return "?";
}

ChallengerStrategy challenger_strategy_from_string(const std::string& s) {
  for (const auto& [k, name] : kChallengerNames) {
    if (s == name) return k;
  }
  throw InputError("unknown challenger strategy '" + s + "'");
}

const char* to_string(ProverStrategy s) {
  switch (s) {
    case ProverStrategy::honest: return "honest";
    case ProverStrategy::colluding: return "colluding";
    case ProverStrategy::dispute_forger: return "dispute_forger";
  }
  return "?";
}

ProverStrategy prover_strategy_from_string(const std::string& s) {
  if (s == "honest") return ProverStrategy::honest;
  if (s == "colluding") return ProverStrategy::colluding;
  if (s == "dispute_forger") return ProverStrategy::dispute_forger;
  throw InputError("unknown prover strategy '" + s + "'");
}

std::set<ChallengerId> AttackConfig::corrupt_ids() const {
  std::set<ChallengerId> ids;
  for (const auto& c : corrupt) ids.insert(c.id);
  return ids;
}

const CorruptChallenger* AttackConfig::find(ChallengerId id) const {
  for (const auto& c : corrupt) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

void AttackConfig::validate(const schedule::ChallengeParams& params, const netsim::Topology& topology) const {
  std::set<ChallengerId> seen;
  for (const auto& c : corrupt) {
    if (c.id >= params.n) throw InputError("corrupt challenger " + std::to_string(c.id) + " does not exist");
    if (!seen.insert(c.id).second) throw InputError("challenger " + std::to_string(c.id) + " listed twice");
    if (c.strategy == ChallengerStrategy::rush && !topology.side_channels.contains(c.id)) {
      throw InputError("challenger " + std::to_string(c.id) + " rushes but has no side channel");
    }
    if (c.strategy == ChallengerStrategy::withhold_fraction && (c.value < 0 || c.value > 1)) {
      throw InputError("withhold_fraction needs a probability in [0, 1]");
    }
    if (c.strategy == ChallengerStrategy::delay && c.value < 0) throw InputError("delay must be non-negative");
    if ((c.strategy == ChallengerStrategy::misreport_rtt || c.strategy == ChallengerStrategy::misreport_count) &&
        c.value < 0) {
      throw InputError("misreported values must be non-negative");
    }
  }
  if (corrupt.size() > params.f) {
    throw InputError(std::to_string(corrupt.size()) + " corrupt challengers exceed f = " + std::to_string(params.f));
  }
}

Instrumented apply(const AttackConfig& attack, const schedule::ChallengeParams& params,
                   const netsim::Topology& topology, std::span<const crypto::KeyPair> challenger_keys,
                   const crypto::KeyPair& prover_keys, roles::AdmissionPolicy admission, std::uint32_t prover_id) {
  attack.validate(params, topology);
  if (challenger_keys.size() != params.n) throw InputError("need one key pair per challenger");
  Instrumented out;
  out.plans.resize(params.n);
  std::vector<crypto::KeyPair> shared_keys;
  std::vector<ChallengerId> shared_ids;
  for (const auto& c : attack.corrupt) {
    auto& plan = out.plans[c.id];
    plan.corrupt = true;
    plan.reports = c.still_reports;
    switch (c.strategy) {
      case ChallengerStrategy::withhold_all: plan.sends = false; break;
      case ChallengerStrategy::withhold_fraction: plan.drop_fraction = c.value; break;
      case ChallengerStrategy::delay: plan.send_delay = static_cast<DurationNs>(std::llround(c.value)); break;
      case ChallengerStrategy::rush:
        plan.side_channel = true;
        plan.burst = true;
        break;
      case ChallengerStrategy::share_keys:
        plan.sends = false;
        shared_keys.push_back(challenger_keys[c.id]);
        shared_ids.push_back(c.id);
        break;
      case ChallengerStrategy::misreport_rtt:
        plan.rtt_override = static_cast<std::uint64_t>(std::llround(std::min(c.value, 9.2e18)));
        break;
      case ChallengerStrategy::misreport_count:
        plan.count_override = static_cast<std::uint32_t>(std::min(c.value, 4294967295.0));
        break;
      case ChallengerStrategy::withhold_report: plan.reports = false; break;
      case ChallengerStrategy::bad_merkle_claim: plan.claim_failure = true; break;
    }
  }
  switch (attack.prover) {
    case ProverStrategy::honest:
      out.prover = std::make_unique<roles::Prover>(prover_keys, params, prover_id, admission);
      break;
    case ProverStrategy::dispute_forger:
      out.prover = std::make_unique<DisputeForger>(prover_keys, params, prover_id, admission);
      break;
    case ProverStrategy::colluding: {
      const auto quota = attack.ack_quota == 0 ? params.k : std::min(attack.ack_quota, params.probes_per_challenger());
      out.prover = std::make_unique<ColludingProver>(prover_keys, params, prover_id, attack.corrupt_ids(),
                                                     std::move(shared_keys), std::move(shared_ids), quota,
                                                     attack.early_response);
      break;
    }
  }
  return out;
}

AttackConfig fuzz_strategies(std::uint64_t seed, std::uint32_t n, std::uint32_t f) {
  if (f > n) throw InputError("f exceeds n");
  AttackConfig attack;
  if (f == 0) return attack;
  Rng rng(derive_seed(seed, 0xadd));
  std::vector<ChallengerId> ids(n);
  for (ChallengerId i = 0; i < n; ++i) ids[i] = i;
  for (std::uint32_t i = 0; i < f; ++i) std::swap(ids[i], ids[i + rng.below(n - i)]);
  std::sort(ids.begin(), ids.begin() + f);
  for (std::uint32_t i = 0; i < f; ++i) {
    CorruptChallenger c;
    c.id = ids[i];
    c.strategy = kChallengerNames[rng.below(kChallengerNames.size())].first;
    switch (c.strategy) {
      case ChallengerStrategy::withhold_fraction: c.value = rng.uniform01(); break;
      case ChallengerStrategy::delay: c.value = std::floor(rng.uniform(0, 200e6)); break;
      case ChallengerStrategy::misreport_rtt: {
        static constexpr std::array<double, 4> kChoices{0, 1, 1e6, 1e18};
        c.value = kChoices[rng.below(kChoices.size())];
        break;
      }
      case ChallengerStrategy::misreport_count: c.value = static_cast<double>(rng.below(5000)); break;
      default: break;
    }
    c.still_reports = rng.below(4) != 0;
    attack.corrupt.push_back(c);
  }
  attack.prover = static_cast<ProverStrategy>(rng.below(3));
  attack.early_response = rng.below(2) == 0;
  return attack;
}

// ColludingProver ------------------------------------------------------------

ColludingProver::ColludingProver(crypto::KeyPair keys, schedule::ChallengeParams params, std::uint32_t prover_id,
                                 std::set<ChallengerId> corrupt, std::vector<crypto::KeyPair> shared_keys,
                                 std::vector<ChallengerId> shared_ids, std::uint32_t quota, bool early_response)
    : inner_(keys, params, prover_id),
      params_(std::move(params)),
      corrupt_(std::move(corrupt)),
      shared_keys_(std::move(shared_keys)),
      shared_ids_(std::move(shared_ids)),
      quota_(quota),
      early_response_(early_response) {}

std::optional<std::vector<wire::ResponsePacket>> ColludingProver::on_start(TimeNs /*now*/) {
  const auto per = params_.signatures_per_probe;
  const auto probes = params_.probes_per_challenger();
  for (std::size_t s = 0; s < shared_keys_.size(); ++s) {
    const crypto::Signer signer(shared_keys_[s].secret_key);
    for (std::uint32_t q = 1; q <= probes; ++q) {
      wire::ChallengePacket p;
      p.challenger_id = shared_ids_[s];
      p.base_seq = roles::probe_base_seq(params_, q);
      p.nonce = roles::challenge_nonce(params_);
      for (std::uint32_t j = 0; j < per; ++j) {
        p.signatures.push_back(signer.sign(crypto::probe_message(p.base_seq + j, params_.m0)));
      }
      inner_.insert(p);
    }
  }
  return maybe_respond();
}

std::optional<std::vector<wire::ResponsePacket>> ColludingProver::on_packet(const wire::ChallengePacket& packet,
                                                                           TimeNs /*now*/) {
  if (inner_.insert(packet) != roles::InsertResult::accepted) return std::nullopt;
  return maybe_respond();
}

std::uint64_t ColludingProver::usable_count() const {
  std::uint64_t sum = 0;
  for (ChallengerId i = 0; i < params_.n; ++i) {
    const auto c = inner_.count(i);
    sum += corrupt_.contains(i) ? std::min(c, quota_) : c;
  }
  return sum;
}

std::optional<std::vector<wire::ResponsePacket>> ColludingProver::maybe_respond() {
  if (inner_.responded()) return std::nullopt;
  const auto count = early_response_ ? usable_count() : inner_.total_count();
  if (count < params_.threshold()) return std::nullopt;
  for (auto id : corrupt_) inner_.truncate(id, quota_);
  return inner_.respond();
}

// DisputeForger --------------------------------------------------------------

wire::ProverReport DisputeForger::report() const {
  auto r = roles::Prover::report();
  std::fill(r.acknowledged.begin(), r.acknowledged.end(), params().probes_per_challenger());
  return r;
}

std::optional<wire::DisputeSubmission> DisputeForger::on_dispute_request(ChallengerId id) const {
  auto sub = roles::Prover::on_dispute_request(id);
  if (!sub) return sub;
  // Pad the committed set with fabricated probes up to the over-reported count.
  std::set<std::uint32_t> have;
  for (const auto& e : sub->packets) have.insert(roles::probe_of_seq(params(), e.seq));
  for (std::uint32_t q = 1; q <= params().probes_per_challenger(); ++q) {
    if (have.contains(q)) continue;
    const auto base = roles::probe_base_seq(params(), q);
    for (std::uint32_t j = 0; j < params().signatures_per_probe; ++j) {
      crypto::Signature fake;
      fake.bytes.fill(static_cast<std::uint8_t>(q));
      sub->packets.push_back({base + j, fake});
    }
  }
  return sub;
}

}  // namespace pob::adversary
