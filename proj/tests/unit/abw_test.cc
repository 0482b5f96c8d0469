#include <gtest/gtest.h>

#include "pob/abw.h"

using namespace pob;
using namespace pob::abw;

namespace {

schedule::ChallengeParams base_params() {
  schedule::DeriveOptions o;
  o.m0.fill(0x11);
  return schedule::derive_params(40e6, 10, 0, millis(100), schedule::RatePolicy::per_n, o);
}

netsim::Topology with_cross(double cross_bps, double yield = 0) {
  auto t = netsim::Topology::ideal(10, 250e6);
  if (cross_bps > 0) t.cross_traffic.push_back({cross_bps, 0, -1});
  t.cross_traffic_yield = yield;
  return t;
}

}  // namespace

TEST(Abw, ConfigValidation) {
  EXPECT_NO_THROW(LadderConfig{}.validate());
  EXPECT_THROW((LadderConfig{40e6, 0, 250e6, 5}.validate()), InputError);
  EXPECT_THROW((LadderConfig{10e6, 20e6, 250e6, 5}.validate()), InputError);
  EXPECT_THROW((LadderConfig{40e6, 20e6, 30e6, 5}.validate()), InputError);
  EXPECT_THROW((LadderConfig{40e6, 20e6, 250e6, 0.5}.validate()), InputError);
}

TEST(Abw, CrossTrafficSetsTheEstimate) {
  // 30 Mbps of inelastic cross traffic leaves 220 of 250 Mbps. Rungs above
  // that still terminate within the timeout, but measure only what is left.
  const auto r = run_ladder({}, with_cross(30e6), base_params(), {}, 220);
  EXPECT_FALSE(r.below_floor);
  EXPECT_NEAR(r.estimate_bps / 220e6, 1.0, 0.10);
  for (const auto& rung : r.rungs) {
    if (rung.output) EXPECT_LE(rung.output->measured_bps, 220e6 * 1.02) << rung.claimed_bps;
  }
  EXPECT_DOUBLE_EQ(r.rungs[1].claimed_bps - r.rungs[0].claimed_bps, 20e6);
}

TEST(Abw, OverrunQueueEndsTheLadder) {
  // With 90 Mbps left the backhaul queue overflows at high rungs and the
  // prover never reaches its threshold.
  const auto r = run_ladder({}, with_cross(160e6), base_params(), {}, 90);
  EXPECT_FALSE(r.reached_max);
  ASSERT_GE(r.rungs.size(), 2u);
  EXPECT_FALSE(r.rungs.back().terminated);
  EXPECT_GT(r.rungs.back().sim.drops.backhaul_queue, 0u);
  for (std::size_t i = 0; i + 1 < r.rungs.size(); ++i) EXPECT_TRUE(r.rungs[i].terminated);
  EXPECT_NEAR(r.estimate_bps / 90e6, 1.0, 0.10);
}

TEST(Abw, YieldingCrossTraffic) {
  const auto r = run_ladder({}, with_cross(160e6, 0.1), base_params(), {}, 90);
  EXPECT_NEAR(r.estimate_bps / 90e6, 1.0, 0.20);
}

TEST(Abw, IdleBackhaulReachesTheTop) {
  const auto r = run_ladder({40e6, 20e6, 240e6, 5}, with_cross(0), base_params(), {}, 3);
  EXPECT_TRUE(r.reached_max);
  EXPECT_GE(r.estimate_bps, 230e6);
  EXPECT_EQ(r.rungs.size(), 11u);
}

TEST(Abw, FirstRungFailureIsBelowFloor) {
  // 5 Mbps left: the 40 Mbps rung would need 8 D, beyond the 5 D timeout.
  const auto r = run_ladder({}, with_cross(245e6), base_params(), {}, 4);
  EXPECT_TRUE(r.below_floor);
  EXPECT_EQ(r.estimate_bps, 0);
  EXPECT_EQ(r.rungs.size(), 1u);
}

TEST(Abw, RungsUseFreshChallenges) {
  const auto r = run_ladder({40e6, 20e6, 60e6, 5}, with_cross(0), base_params(), {}, 5);
  ASSERT_EQ(r.rungs.size(), 2u);
  EXPECT_NE(r.rungs[0].sim.params.m0, r.rungs[1].sim.params.m0);
  EXPECT_NE(r.rungs[0].sim.params.k, r.rungs[1].sim.params.k);
}
