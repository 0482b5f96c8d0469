#include <gtest/gtest.h>

#include "pob/netsim.h"

using namespace pob;
using namespace pob::netsim;

namespace {

schedule::ChallengeParams params_for(double theta, std::uint32_t n, std::uint32_t f = 0,
                                     schedule::RatePolicy policy = schedule::RatePolicy::per_n) {
  schedule::DeriveOptions o;
  o.m0.fill(0x33);
  return schedule::derive_params(theta, n, f, millis(100), policy, o);
}

}  // namespace

TEST(Netsim, EventLoopOrdersByTimeThenInsertion) {
  EventLoop loop;
  std::string seen;
  loop.at(20, [&] { seen += 'c'; });
  loop.at(10, [&] { seen += 'a'; });
  loop.at(10, [&] {
    seen += 'b';
    loop.at(15, [&] { seen += 'x'; });
  });
  loop.at(99, [&] { seen += 'z'; });
  EXPECT_EQ(loop.run(50), 4u);
  EXPECT_EQ(seen, "abxc");
  EXPECT_FALSE(loop.empty());
}

TEST(Netsim, ServiceTime) {
  EXPECT_EQ(serialization_ns(1514, 250e6), 48'448);
  EXPECT_EQ(serialization_ns(1514, 1e9), 12'112);
}

TEST(Netsim, PingRoundTrip) {
  auto topo = Topology::ideal(2, 250e6, 1e9, millis(12));
  topo.backhaul.propagation = 0;
  Rng rng(1);
  const auto rtts = ping(topo, 0, 20, rng);
  ASSERT_EQ(rtts.size(), 20u);
  const DurationNs expected = millis(24) + 2 * (serialization_ns(98, 1e9) + serialization_ns(98, 250e6));
  for (auto r : rtts) EXPECT_EQ(r, expected);
  EXPECT_EQ(schedule::estimate_latency(rtts), expected / 2);

  topo.uplinks[1].jitter = Distribution::uniform(0, millis(1));
  for (auto r : ping(topo, 1, 200, rng)) {
    EXPECT_GE(r, expected);
    EXPECT_LE(r, expected + millis(2));
  }
  topo.uplinks[1].loss_rate = 1;
  EXPECT_THROW(ping(topo, 1, 20, rng), SimError);
  EXPECT_THROW(ping(topo, 5, 20, rng), InputError);
}

TEST(Netsim, JitterIsNeverNegative) {
  Rng rng(3);
  const auto d = Distribution::normal(0, 1e6);
  for (int i = 0; i < 1000; ++i) ASSERT_GE(d.draw_jitter(rng), 0);
}

TEST(Netsim, IdealTopologyMeasuresClaim) {
  const auto topo = Topology::ideal(5, 50e6);
  const auto p = params_for(50e6, 5);
  const auto r = run_scenario(topo, p, {}, 11);
  ASSERT_TRUE(r.terminated);
  ASSERT_TRUE(r.output);
  EXPECT_NEAR(r.output->measured_bps / 50e6, 1.0, 0.02);
  EXPECT_EQ(r.output->cnt, p.threshold());
  EXPECT_EQ(r.not_terminate_count, 0u);
  EXPECT_EQ(r.drops.total(), 0u);
  std::uint64_t counted = 0;
  for (const auto& c : r.challengers) counted += c.counted;
  EXPECT_EQ(counted, r.output->cnt);
}

TEST(Netsim, RunsAreDeterministic) {
  auto topo = Topology::ideal(4, 40e6);
  topo.uplinks[2].jitter = Distribution::normal(0, millis(1));
  topo.clock_offset = Distribution::uniform(-millis(2), millis(2));
  topo.admission_slack = millis(4);
  const auto p = params_for(40e6, 4);
  const auto a = run_scenario(topo, p, {}, 77);
  const auto b = run_scenario(topo, p, {}, 77);
  EXPECT_EQ(a.trace_text(), b.trace_text());
  EXPECT_FALSE(a.trace.empty());
  EXPECT_EQ(a.output, b.output);
  const auto c = run_scenario(topo, p, {}, 78);
  EXPECT_NE(a.trace_text(), c.trace_text());
}

TEST(Netsim, DropTailQueueDrops) {
  // Challengers overrun a backhaul a fifth of the claim behind a ten-packet queue.
  auto topo = Topology::ideal(4, 20e6);
  topo.backhaul.queue_capacity = 10 * 1514;
  const auto p = params_for(100e6, 4);
  const auto r = run_scenario(topo, p, {}, 5);
  EXPECT_GT(r.drops.backhaul_queue, 0u);
  EXPECT_EQ(r.drops.uplink_queue, 0u);
  EXPECT_EQ(r.challenge_bytes, static_cast<std::uint64_t>(4) * p.probes_per_challenger() * 1514);
  EXPECT_EQ(r.backhaul_bytes + r.drops.backhaul_queue * 1514, r.challenge_bytes);
  EXPECT_FALSE(r.terminated);
}

TEST(Netsim, RandomLossCounted) {
  auto topo = Topology::ideal(4, 40e6);
  for (auto& u : topo.uplinks) u.loss_rate = 0.05;
  const auto r = run_scenario(topo, params_for(40e6, 4), {}, 9);
  EXPECT_GT(r.drops.loss, 0u);
  EXPECT_EQ(r.backhaul_bytes + r.drops.total() * 1514, r.challenge_bytes);
}

TEST(Netsim, NoisyClocksStayWithinEightPercent) {
  // Clock offsets of +-15 ms and 2 ms of jitter on every access link.
  auto topo = Topology::ideal(10, 250e6);
  topo.clock_offset = Distribution::uniform(-millis(15), millis(15));
  for (auto& u : topo.uplinks) u.jitter = Distribution::normal(0, millis(2));
  topo.admission_slack = millis(30);
  const auto p = params_for(250e6, 10);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = run_scenario(topo, p, {}, seed);
    ASSERT_TRUE(r.output) << seed;
    EXPECT_NEAR(r.output->measured_bps / 250e6, 1.0, 0.08) << seed;
  }
}

TEST(Netsim, CalibratedOverhead) {
  EXPECT_EQ(calibrate_overhead(500e6), millis(4.6));
  EXPECT_EQ(calibrate_overhead(750e6), millis(7.3));
  EXPECT_EQ(calibrate_overhead(875e6), millis(8.75));
  EXPECT_EQ(calibrate_overhead(1000e6), millis(10.2));
  EXPECT_THROW(calibrate_overhead(0), InputError);
  Topology t;
  t.overhead_mode = OverheadMode::fixed;
  t.fixed_overhead = 123;
  EXPECT_EQ(compute_overhead(t, 500e6), 123);
  t.overhead_mode = OverheadMode::zero;
  EXPECT_EQ(compute_overhead(t, 500e6), 0);
}

TEST(Netsim, OverheadStretchesDelta) {
  auto topo = Topology::ideal(4, 40e6);
  const auto p = params_for(40e6, 4);
  const auto base = run_scenario(topo, p, {}, 1);
  topo.overhead_mode = OverheadMode::fixed;
  topo.fixed_overhead = millis(10);
  const auto slow = run_scenario(topo, p, {}, 1);
  ASSERT_TRUE(base.output && slow.output);
  EXPECT_NEAR(static_cast<double>(slow.output->delta_median - base.output->delta_median), millis(10), millis(0.5));
}

TEST(Netsim, TopologyValidation) {
  auto t = Topology::ideal(3, 1e8);
  EXPECT_NO_THROW(t.validate());
  t.uplinks[1].rate_bps = 0;
  EXPECT_THROW(t.validate(), InputError);
  t = Topology::ideal(3, 1e8);
  t.uplinks[0].loss_rate = 1.5;
  EXPECT_THROW(t.validate(), InputError);
  t = Topology::ideal(3, 1e8);
  EXPECT_THROW(run_scenario(t, params_for(1e8, 4), {}, 1), InputError);
}

TEST(Netsim, CrossTrafficReducesDrainRate) {
  auto t = Topology::ideal(1, 250e6);
  t.cross_traffic.push_back({160e6, millis(10), millis(50)});
  EXPECT_DOUBLE_EQ(t.effective_backhaul_rate(millis(5), true), 250e6);
  EXPECT_DOUBLE_EQ(t.effective_backhaul_rate(millis(20), true), 90e6);
  t.cross_traffic_yield = 0.1;
  EXPECT_DOUBLE_EQ(t.effective_backhaul_rate(millis(20), true), 106e6);
  EXPECT_DOUBLE_EQ(t.effective_backhaul_rate(millis(60), true), 250e6);
}
