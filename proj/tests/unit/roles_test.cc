#include <gtest/gtest.h>

#include "pob/random.h"
#include "pob/roles.h"

using namespace pob;
using namespace pob::roles;

namespace {

constexpr TimeNs kT0 = 10'000'000'000;

// A loss-free round wired together by hand: every probe reaches the prover at
// its send instant, responses come back after `rtt`.
struct Round {
  ChallengeParams params;
  std::vector<crypto::KeyPair> keys;
  crypto::KeyPair prover_keys;
  std::vector<std::unique_ptr<Challenger>> challengers;
  std::vector<ChallengerStart> starts;
  std::unique_ptr<Prover> prover;
  std::unique_ptr<Verifier> verifier;

  Round(std::uint32_t n, std::uint32_t f, std::uint32_t k, double rho = 1.1) {
    schedule::DeriveOptions o;
    o.t0 = kT0;
    o.overprovision = rho;
    for (std::size_t i = 0; i < 32; ++i) o.m0[i] = static_cast<std::uint8_t>(i * 7);
    // theta0 = k probes per second.
    params = schedule::derive_params(k * 12112.0 * (n - f), n, f, 1'000'000'000, schedule::RatePolicy::per_n_minus_f, o);
    Rng rng(99);
    for (std::uint32_t i = 0; i < n; ++i) keys.push_back(crypto::keygen(rng.bytes32()));
    prover_keys = crypto::keygen(rng.bytes32());
    std::vector<crypto::PublicKey> pubs;
    for (std::uint32_t i = 0; i < n; ++i) {
      challengers.push_back(std::make_unique<Challenger>(i, keys[i], params, kT0, 0, prover_keys.public_key));
      starts.push_back(challengers.back()->start(kT0 - 1));
      pubs.push_back(keys[i].public_key);
    }
    prover = std::make_unique<Prover>(prover_keys, params);
    verifier = std::make_unique<Verifier>(params, pubs);
  }

  // Delivers probes in time order until the prover responds; returns the response time.
  std::optional<std::pair<TimeNs, std::vector<wire::ResponsePacket>>> deliver(
      const std::set<ChallengerId>& silent = {}) {
    std::vector<std::pair<TimeNs, const ScheduledSend*>> all;
    std::vector<ChallengerId> owner;
    for (ChallengerId i = 0; i < starts.size(); ++i) {
      if (silent.contains(i)) continue;
      for (const auto& s : starts[i].sends) all.emplace_back(s.at, &s);
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [at, send] : all) {
      if (auto r = prover->on_packet(wire::decode_as<wire::ChallengePacket>(send->packet), at)) return std::make_pair(at, *r);
    }
    return std::nullopt;
  }
};

}  // namespace

TEST(Roles, ProbeSequenceMapping) {
  Round r(1, 0, 3);
  EXPECT_EQ(probe_base_seq(r.params, 1), 1u);
  EXPECT_EQ(probe_base_seq(r.params, 2), 23u);
  EXPECT_EQ(probe_of_seq(r.params, 22), 1u);
  EXPECT_EQ(probe_of_seq(r.params, 23), 2u);
}

TEST(Roles, ChallengerSchedulesOnePacketPerProbe) {
  // With the probe as the unit, k = 22 and rho = 1 is 22 packets of 22 signatures.
  Round r(1, 0, 22, 1.0);
  ASSERT_EQ(r.starts[0].sends.size(), 22u);
  for (const auto& s : r.starts[0].sends) {
    const auto pkt = wire::decode_as<wire::ChallengePacket>(s.packet);
    ASSERT_EQ(pkt.signatures.size(), 22u);
    for (std::size_t j = 0; j < pkt.signatures.size(); ++j) {
      ASSERT_TRUE(crypto::verify(r.keys[0].public_key, crypto::probe_message(pkt.base_seq + j, r.params.m0),
                                 pkt.signatures[j]));
    }
  }
  Round big(1, 0, 206);
  EXPECT_EQ(big.starts[0].sends.size(), 227u);
  EXPECT_EQ(big.starts[0].sends[1].at - big.starts[0].sends[0].at,
            static_cast<TimeNs>(std::llround(big.params.probe_interval_ns())));
}

TEST(Roles, LateStartShiftsTrain) {
  Round r(1, 0, 5);
  Challenger late(0, r.keys[0], r.params, kT0, 0, r.prover_keys.public_key);
  const auto start = late.start(kT0 + 1000);
  EXPECT_EQ(start.slip, 1000);
  EXPECT_EQ(start.sends.front().at, kT0 + 1000);
}

TEST(Roles, ProverDeduplicatesAndRejectsStrangers) {
  Round r(2, 0, 5);
  const auto pkt = wire::decode_as<wire::ChallengePacket>(r.starts[0].sends[0].packet);
  EXPECT_EQ(r.prover->insert(pkt), InsertResult::accepted);
  EXPECT_EQ(r.prover->insert(pkt), InsertResult::duplicate);
  EXPECT_EQ(r.prover->total_count(), 1u);
  auto foreign = pkt;
  foreign.nonce[0] ^= 1;
  EXPECT_EQ(r.prover->insert(foreign), InsertResult::foreign_challenge);
  auto stranger = pkt;
  stranger.challenger_id = 7;
  EXPECT_EQ(r.prover->insert(stranger), InsertResult::unknown_challenger);
}

TEST(Roles, HonestRoundProducesOutput) {
  Round r(3, 0, 10);
  const auto resp = r.deliver();
  ASSERT_TRUE(resp);
  EXPECT_EQ(r.prover->total_count(), r.params.threshold());
  const auto [at, responses] = *resp;
  for (ChallengerId i = 0; i < 3; ++i) {
    // Zero latency: Δ_i is the response instant minus t_i1.
    ASSERT_TRUE(r.challengers[i]->on_response(responses[i], at + 100'000'000));
    EXPECT_EQ(*r.challengers[i]->rtt(), static_cast<DurationNs>(at + 100'000'000 - kT0));
  }
  EXPECT_FALSE(r.verifier->on_prover_report(r.prover->report()));
  std::optional<PoBOutput> out;
  for (const auto& v : r.prover->verification_messages()) {
    const auto report = r.challengers[v.challenger_id]->on_verification(v);
    ASSERT_TRUE(report);
    EXPECT_EQ(report->status, wire::ReportStatus::ok);
    EXPECT_EQ(report->packets_acknowledged, 10u);
    if (auto o = r.verifier->on_report(*report)) out = o;
  }
  ASSERT_TRUE(out);
  EXPECT_EQ(out->cnt, 30u);
  std::uint64_t sum = 0;
  for (const auto& [id, c] : r.verifier->counted()) sum += c;
  EXPECT_EQ(sum, out->cnt);
}

TEST(Roles, ResponseArithmeticAndForgery) {
  Round r(1, 0, 4);
  Challenger c(0, r.keys[0], r.params, kT0, millis(5), r.prover_keys.public_key);
  c.start(kT0 - 1);
  auto resp = r.deliver();
  ASSERT_TRUE(resp);
  auto forged = resp->second[0];
  forged.prover_signature.bytes[0] ^= 1;
  EXPECT_FALSE(c.on_response(forged, kT0 + millis(110)));
  EXPECT_FALSE(c.rtt());
  EXPECT_TRUE(c.on_response(resp->second[0], kT0 + 2 * millis(5) + millis(100)));
  EXPECT_EQ(*c.rtt(), millis(100));
}

TEST(Roles, VerificationDetectsTamperedBitmap) {
  Round r(2, 0, 6);
  auto resp = r.deliver();
  ASSERT_TRUE(resp);
  r.challengers[0]->on_response(resp->second[0], resp->first + 10);
  auto msgs = r.prover->verification_messages();
  auto tampered = msgs[0];
  // Claim a probe the prover never received.
  std::size_t unset = 0;
  while (tampered.bitmap.test(unset)) ++unset;
  tampered.bitmap.set(unset);
  const auto report = r.challengers[0]->on_verification(tampered);
  ASSERT_TRUE(report);
  EXPECT_EQ(report->status, wire::ReportStatus::verification_failed);
  EXPECT_EQ(r.challengers[0]->phase(), ChallengerPhase::failed);
}

TEST(Roles, VerificationOverSubsetAfterDrops) {
  Round r(1, 0, 40, 1.0);
  Rng rng(4);
  std::set<std::uint32_t> dropped;
  while (dropped.size() < 4) dropped.insert(static_cast<std::uint32_t>(rng.below(40)));
  for (std::uint32_t q = 0; q < 40; ++q) {
    if (!dropped.contains(q)) r.prover->insert(wire::decode_as<wire::ChallengePacket>(r.starts[0].sends[q].packet));
  }
  const auto responses = r.prover->respond();
  r.challengers[0]->on_response(responses[0], kT0 + 1);
  const auto report = r.challengers[0]->on_verification(r.prover->verification_messages()[0]);
  ASSERT_TRUE(report);
  EXPECT_EQ(report->status, wire::ReportStatus::ok);
  EXPECT_EQ(report->packets_acknowledged, 36u);
}

TEST(Roles, VerifierOutputArithmetic) {
  // n = 10, cnt = 2060 probes of 1514 bytes, median Δ = 0.1 s.
  Round r(10, 0, 206);
  wire::ProverReport pr;
  pr.merkle_root.bytes.fill(1);
  pr.acknowledged.assign(10, 206);
  Verifier v(r.params, [&] {
    std::vector<crypto::PublicKey> p;
    for (const auto& k : r.keys) p.push_back(k.public_key);
    return p;
  }());
  v.on_prover_report(pr);
  std::optional<PoBOutput> out;
  for (ChallengerId i = 0; i < 10; ++i) {
    wire::ChallengerReport rep{i, 0, wire::ReportStatus::ok, pr.merkle_root, 100'000'000, 206};
    if (auto o = v.on_report(rep)) out = o;
  }
  ASSERT_TRUE(out);
  EXPECT_EQ(out->cnt, 2060u);
  EXPECT_NEAR(out->measured_bps, 2060.0 * 1514 * 8 / 0.1, 1e-6);
  EXPECT_NEAR(out->measured_bps / 1e6, 249.5, 0.01);
  EXPECT_DOUBLE_EQ(out->guaranteed_bps, out->measured_bps);
}

TEST(Roles, VerifierRejectsBadReports) {
  Round r(4, 1, 5);
  std::vector<crypto::PublicKey> pubs;
  for (const auto& k : r.keys) pubs.push_back(k.public_key);
  Verifier v(r.params, pubs);
  wire::ProverReport pr;
  pr.merkle_root.bytes.fill(1);
  pr.acknowledged.assign(4, 5);
  // Reports before the prover's root are buffered.
  wire::ChallengerReport early{0, 0, wire::ReportStatus::ok, pr.merkle_root, 1000, 5};
  v.on_report(early);
  EXPECT_EQ(v.last_verdict(), ReportVerdict::buffered);
  v.on_prover_report(pr);
  EXPECT_EQ(v.verdicts().at(0), ReportVerdict::accepted);

  v.on_report(early);
  EXPECT_EQ(v.last_verdict(), ReportVerdict::rejected_duplicate);
  wire::ChallengerReport wrong_root{1, 0, wire::ReportStatus::ok, {}, 1000, 5};
  v.on_report(wrong_root);
  EXPECT_EQ(v.last_verdict(), ReportVerdict::rejected_root);
  wire::ChallengerReport inflated{2, 0, wire::ReportStatus::ok, pr.merkle_root, 1000, 6};
  v.on_report(inflated);
  EXPECT_EQ(v.last_verdict(), ReportVerdict::rejected_count);
  EXPECT_EQ(v.cnt(), 5u);
  EXPECT_FALSE(v.log().empty());
}

TEST(Roles, Median) {
  EXPECT_EQ(median(std::vector<DurationNs>{3}), 3);
  EXPECT_EQ(median(std::vector<DurationNs>{1, 2, 3, 4}), 3);
  std::vector<DurationNs> attacked(6, millis(100));
  attacked.push_back(1);
  attacked.push_back(1);
  EXPECT_EQ(median(attacked), millis(100));
  EXPECT_THROW(median(std::vector<DurationNs>{}), InputError);
}

TEST(Roles, DisputeUpholdsHonestProverForSilentChallenger) {
  Round r(4, 1, 6);
  const auto resp = r.deliver();
  ASSERT_TRUE(resp);
  r.verifier->on_prover_report(r.prover->report());
  for (const auto& v : r.prover->verification_messages()) {
    if (v.challenger_id == 3) continue;  // withholds its report
    r.challengers[v.challenger_id]->on_response(resp->second[v.challenger_id], resp->first + 5);
    r.verifier->on_report(*r.challengers[v.challenger_id]->on_verification(v));
  }
  const auto before = r.verifier->cnt();
  EXPECT_EQ(r.verifier->dispute_candidates(), std::vector<ChallengerId>{3});
  const auto sub = r.prover->on_dispute_request(3);
  ASSERT_TRUE(sub);
  EXPECT_EQ(r.verifier->resolve_dispute(*sub), DisputeOutcome::prover_upheld);
  EXPECT_EQ(r.verifier->cnt(), before + r.prover->count(3));
  EXPECT_TRUE(r.verifier->counted().contains(3));
}

TEST(Roles, DisputeRejectsWrongSetAndForgedSignatures) {
  for (int variant = 0; variant < 2; ++variant) {
    Round r(4, 1, 6);
    ASSERT_TRUE(r.deliver());
    r.verifier->on_prover_report(r.prover->report());
    auto sub = *r.prover->on_dispute_request(2);
    if (variant == 0) {
      sub.packets.pop_back();  // no longer the committed leaf
    } else {
      // Re-sign under a key that is not the challenger's, then rebuild a
      // consistent commitment so only the signature check can fail.
      const auto rogue = crypto::keygen(Bytes(32, 77));
      for (auto& e : sub.packets) e.signature = crypto::sign(rogue.secret_key, crypto::probe_message(e.seq, r.params.m0));
      std::vector<crypto::Digest> leaves = r.prover->receipts();
      leaves[2] = crypto::hash_packet_set(sub.packets);
      sub.merkle_proof = crypto::merkle_prove(leaves, 2);
      wire::ProverReport pr = r.prover->report();
      pr.merkle_root = crypto::merkle_root(leaves);
      std::vector<crypto::PublicKey> pubs;
      for (const auto& k : r.keys) pubs.push_back(k.public_key);
      r.verifier = std::make_unique<Verifier>(r.params, pubs);
      r.verifier->on_prover_report(pr);
    }
    EXPECT_EQ(r.verifier->resolve_dispute(sub), DisputeOutcome::prover_rejected) << variant;
    EXPECT_EQ(r.verifier->cnt(), 0u);
  }
}
