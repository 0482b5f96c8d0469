#include <gtest/gtest.h>

#include "pob/adversary.h"
#include "pob/netsim.h"

using namespace pob;
using namespace pob::adversary;

namespace {

schedule::ChallengeParams params_for(double theta, std::uint32_t n, std::uint32_t f) {
  schedule::DeriveOptions o;
  o.m0.fill(0x5c);
  return schedule::derive_params(theta, n, f, millis(100), schedule::RatePolicy::per_n_minus_f, o);
}

AttackConfig two_of(ChallengerStrategy s, ProverStrategy prover = ProverStrategy::honest, double value = 0) {
  AttackConfig a;
  a.corrupt = {{0, s, value, true}, {1, s, value, true}};
  a.prover = prover;
  return a;
}

netsim::SimResult run(const AttackConfig& attack, std::uint64_t seed = 1, double theta = 250e6) {
  auto topo = netsim::Topology::ideal(10, theta);
  topo.side_channels = {0, 1};
  return netsim::run_scenario(topo, params_for(theta, 10, 2), attack, seed);
}

}  // namespace

TEST(Adversary, StrategyNamesRoundTrip) {
  for (auto s : {ChallengerStrategy::withhold_all, ChallengerStrategy::withhold_fraction, ChallengerStrategy::delay,
                 ChallengerStrategy::rush, ChallengerStrategy::share_keys, ChallengerStrategy::misreport_rtt,
                 ChallengerStrategy::misreport_count, ChallengerStrategy::withhold_report,
                 ChallengerStrategy::bad_merkle_claim}) {
    EXPECT_EQ(challenger_strategy_from_string(to_string(s)), s);
  }
  for (auto p : {ProverStrategy::honest, ProverStrategy::colluding, ProverStrategy::dispute_forger}) {
    EXPECT_EQ(prover_strategy_from_string(to_string(p)), p);
  }
  EXPECT_THROW(challenger_strategy_from_string("sneaky"), InputError);
}

TEST(Adversary, FuzzIsSeededAndSized) {
  EXPECT_TRUE(fuzz_strategies(5, 10, 0).corrupt.empty());
  EXPECT_EQ(fuzz_strategies(5, 10, 0).prover, ProverStrategy::honest);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = fuzz_strategies(seed, 10, 3);
    EXPECT_EQ(a, fuzz_strategies(seed, 10, 3));
    EXPECT_EQ(a.corrupt_ids().size(), 3u);
  }
  EXPECT_NE(fuzz_strategies(1, 10, 3), fuzz_strategies(2, 10, 3));
}

TEST(Adversary, ValidationErrors) {
  const auto p = params_for(250e6, 10, 2);
  auto topo = netsim::Topology::ideal(10, 250e6);
  EXPECT_THROW(two_of(ChallengerStrategy::rush).validate(p, topo), InputError);
  topo.side_channels = {0, 1};
  EXPECT_NO_THROW(two_of(ChallengerStrategy::rush).validate(p, topo));
  AttackConfig many;
  many.corrupt = {{0}, {1}, {2}};
  EXPECT_THROW(many.validate(p, topo), InputError);
  AttackConfig twice;
  twice.corrupt = {{4}, {4}};
  EXPECT_THROW(twice.validate(p, topo), InputError);
  AttackConfig stranger;
  stranger.corrupt = {{10}};
  EXPECT_THROW(stranger.validate(p, topo), InputError);
  EXPECT_THROW(two_of(ChallengerStrategy::withhold_fraction, ProverStrategy::honest, 1.5).validate(p, topo), InputError);
}

TEST(Adversary, WithholdingShrinksOnlyTheGuarantee) {
  const auto r = run(two_of(ChallengerStrategy::withhold_all));
  ASSERT_TRUE(r.output);
  EXPECT_NEAR(r.output->measured_bps / 250e6, 1.0, 0.02);
  EXPECT_NEAR(r.output->guaranteed_bps / 187.5e6, 1.0, 0.02);
  EXPECT_EQ(r.drops.withheld, 2u * r.params.probes_per_challenger());
}

TEST(Adversary, RushingWithColludingProver) {
  const auto r = run(two_of(ChallengerStrategy::rush, ProverStrategy::colluding));
  ASSERT_TRUE(r.output);
  // theta (n - f) / (n - f - r) with r = 2 rushers.
  EXPECT_NEAR(r.output->measured_bps / (250e6 * 8 / 6), 1.0, 0.03);
  EXPECT_LE(r.output->guaranteed_bps, 250e6 * 1.01);
}

TEST(Adversary, SharedKeysMatchRushing) {
  const auto r = run(two_of(ChallengerStrategy::share_keys, ProverStrategy::colluding));
  ASSERT_TRUE(r.output);
  EXPECT_NEAR(r.output->measured_bps / (250e6 * 8 / 6), 1.0, 0.03);
  EXPECT_LE(r.output->guaranteed_bps, 250e6 * 1.01);
}

TEST(Adversary, OverAcknowledgingBeyondKIsBoundedByRho) {
  // A quota above k lets each rusher stand in for up to ceil(1.1 k) probes, so
  // the n - f honest challengers need only (n - f)k - r ceil(1.1 k) of theirs.
  // The guarantee then reaches theta (n - 2f) / (n - f - 1.1 r), just above theta.
  auto attack = two_of(ChallengerStrategy::rush, ProverStrategy::colluding);
  const auto p = params_for(250e6, 10, 2);
  attack.ack_quota = p.probes_per_challenger();
  const auto r = run(attack);
  ASSERT_TRUE(r.output);
  const double honest_needed = static_cast<double>(p.threshold()) - 2.0 * p.probes_per_challenger();
  const double bound = 250e6 * p.threshold() / honest_needed * 6 / 8;
  EXPECT_GT(r.output->guaranteed_bps, 250e6);
  EXPECT_NEAR(r.output->guaranteed_bps / bound, 1.0, 0.03);
  EXPECT_NEAR(bound / 250e6, 6 / (8 - 2.2), 0.01);
}

TEST(Adversary, MisreportedRttCannotMoveTheMedian) {
  const auto honest = run({});
  ASSERT_TRUE(honest.output);
  for (double v : {0.0, 1e18}) {
    const auto r = run(two_of(ChallengerStrategy::misreport_rtt, ProverStrategy::honest, v));
    ASSERT_TRUE(r.output) << v;
    EXPECT_NEAR(r.output->guaranteed_bps / honest.output->guaranteed_bps, 1.0, 0.02) << v;
    EXPECT_LE(r.output->guaranteed_bps, 250e6 * 1.01) << v;
  }
}

TEST(Adversary, InflatedCountIsRejected) {
  const auto r = run(two_of(ChallengerStrategy::misreport_count, ProverStrategy::honest, 4000));
  ASSERT_TRUE(r.output);
  EXPECT_LE(r.output->cnt, r.params.threshold() + 2u * r.params.probes_per_challenger());
  EXPECT_LE(r.output->guaranteed_bps, 250e6 * 1.01);
}

TEST(Adversary, BadMerkleClaimIsOverturnedByDispute) {
  const auto r = run(two_of(ChallengerStrategy::bad_merkle_claim));
  ASSERT_TRUE(r.output);
  std::size_t upheld = 0;
  for (const auto& [id, outcome] : r.disputes) upheld += outcome == roles::DisputeOutcome::prover_upheld;
  EXPECT_EQ(upheld, 2u);
  EXPECT_NEAR(r.output->measured_bps / 250e6, 1.0, 0.02);
}

TEST(Adversary, ForgedDisputesAreRejected) {
  AttackConfig a = two_of(ChallengerStrategy::withhold_report, ProverStrategy::dispute_forger);
  const auto r = run(a);
  std::size_t rejected = 0;
  for (const auto& [id, outcome] : r.disputes) rejected += outcome == roles::DisputeOutcome::prover_rejected;
  EXPECT_GT(rejected, 0u);
  if (r.output) EXPECT_LE(r.output->guaranteed_bps, 250e6 * 1.01);
}
