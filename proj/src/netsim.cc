#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "pob/netsim.h"

namespace pob::netsim {

void EventLoop::at(TimeNs t, std::function<void()> fn) {
  if (t < now_) t = now_;
  queue_.push(Event{t, next_seq_++, std::move(fn)});
}

std::uint64_t EventLoop::run(TimeNs horizon) {
  std::uint64_t processed = 0;
  while (!queue_.empty() && queue_.top().time <= horizon) {
    auto ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ev.fn();
    ++processed;
  }
  return processed;
}

DurationNs serialization_ns(std::uint64_t bytes, double rate_bps) {
  return static_cast<DurationNs>(std::llround(static_cast<double>(bytes) * 8e9 / rate_bps));
}

std::string SimResult::trace_text() const {
  std::string out;
  for (const auto& r : trace) {
    out += std::to_string(r.time);
    out += ' ';
    out += r.node;
    out += ' ';
    out += r.event;
    if (!r.detail.empty()) {
      out += ' ';
      out += r.detail;
    }
    out += '\n';
  }
  return out;
}

namespace {

const std::size_t kPingWireBytes = wire::on_wire_size(wire::encode(wire::Ping{}).size());

// One-way trip of a small message from the prover out to challenger i.
DurationNs downstream_delay(const Topology& topo, ChallengerId i, std::uint64_t wire_bytes, Rng& rng) {
  const auto& b = topo.backhaul;
  const auto& u = topo.uplinks[i];
  return serialization_ns(wire_bytes, b.rate_bps) + b.propagation + b.jitter.draw_jitter(rng) +
         serialization_ns(wire_bytes, u.rate_bps) + u.propagation + u.jitter.draw_jitter(rng);
}

std::string cid(ChallengerId i) { return "c" + std::to_string(i); }

class Simulation {
 public:
  Simulation(const Topology& topo, const schedule::ChallengeParams& params, const adversary::AttackConfig& attack,
             std::uint64_t seed, const SimOptions& opts)
      : topo_(topo),
        params_(params),
        attack_(attack),
        opts_(opts),
        net_rng_(derive_seed(seed, 4)),
        adv_rng_(derive_seed(seed, 5)),
        seed_(seed) {}

  SimResult run();

 private:
  void trace(const std::string& node, const std::string& event, std::string detail = {}) {
    if (opts_.record_trace) result_.trace.push_back({loop_.now(), node, event, std::move(detail)});
  }
  TimeNs true_time(ChallengerId i, TimeNs local) const {
    const auto t = static_cast<DurationNs>(local) - offsets_[i];
    return t < 0 ? 0 : static_cast<TimeNs>(t);
  }
  TimeNs local_time(ChallengerId i) const {
    const auto t = static_cast<DurationNs>(loop_.now()) + offsets_[i];
    return t < 0 ? 0 : static_cast<TimeNs>(t);
  }
  DurationNs since_t0() const { return static_cast<DurationNs>(loop_.now()) - static_cast<DurationNs>(params_.t0); }

  void send_probe(ChallengerId i, std::uint32_t q, const Bytes& packet);
  void backhaul_enqueue(ChallengerId i, std::uint32_t q, Bytes packet);
  void backhaul_start();
  void backhaul_depart();
  void prover_receive(Bytes packet, const char* via);
  void emit_responses(std::vector<wire::ResponsePacket> responses);
  void challenger_response(ChallengerId i, Bytes bytes);
  void challenger_verification(ChallengerId i, Bytes bytes);
  void verifier_report(Bytes bytes);
  void verifier_prover_report(Bytes bytes);
  void verifier_deadline();
  void note_output(const std::optional<roles::PoBOutput>& out);

  const Topology& topo_;
  schedule::ChallengeParams params_;
  const adversary::AttackConfig& attack_;
  SimOptions opts_;
  Rng net_rng_;
  Rng adv_rng_;
  std::uint64_t seed_;

  EventLoop loop_;
  SimResult result_;
  std::vector<DurationNs> offsets_;
  std::vector<crypto::KeyPair> keys_;
  std::vector<roles::Challenger> challengers_;
  std::vector<adversary::ChallengerPlan> plans_;
  std::unique_ptr<roles::ProverAgent> prover_;
  std::unique_ptr<roles::Verifier> verifier_;
  std::vector<TimeNs> uplink_busy_;
  DurationNs overhead_ = 0;
  TimeNs deadline_ = 0;

  struct Queued {
    ChallengerId from;
    std::uint32_t probe;
    Bytes bytes;
  };
  std::deque<Queued> backhaul_queue_;
  std::uint64_t backhaul_bytes_in_system_ = 0;
  bool backhaul_busy_ = false;
};

}  // namespace

RoundKeys derive_keys(std::uint64_t seed, std::uint32_t n) {
  RoundKeys keys;
  Rng rng(derive_seed(seed, 1));
  for (ChallengerId i = 0; i < n; ++i) {
    const auto s = rng.bytes32();
    keys.challengers.push_back(crypto::keygen(s));
  }
  const auto s = rng.bytes32();
  keys.prover = crypto::keygen(s);
  return keys;
}

namespace {

SimResult Simulation::run() {
  topo_.validate();
  const auto n = params_.n;
  if (topo_.n() != n) {
    throw InputError("topology has " + std::to_string(topo_.n()) + " challengers, parameters say " + std::to_string(n));
  }
  result_.params = params_;

  auto round_keys = derive_keys(seed_, n);
  keys_ = std::move(round_keys.challengers);
  const auto prover_keys = round_keys.prover;

  Rng offset_rng(derive_seed(seed_, 2));
  for (ChallengerId i = 0; i < n; ++i) {
    offsets_.push_back(static_cast<DurationNs>(std::llround(topo_.clock_offset.draw(offset_rng))));
  }

  Rng ping_rng(derive_seed(seed_, 3));
  std::vector<DurationNs> latencies;
  for (ChallengerId i = 0; i < n; ++i) {
    latencies.push_back(schedule::estimate_latency(ping(topo_, i, opts_.ping_count, ping_rng), opts_.estimator));
  }
  const auto sched = schedule::send_schedule(params_, latencies);
  const auto l_ref = *std::max_element(latencies.begin(), latencies.end());

  roles::AdmissionPolicy admission;
  admission.enabled = topo_.admission_slack >= 0;
  admission.reference = params_.t0 + static_cast<TimeNs>(l_ref);
  admission.slack = std::max<DurationNs>(topo_.admission_slack, 0);

  auto inst = adversary::apply(attack_, params_, topo_, keys_, prover_keys, admission);
  plans_ = std::move(inst.plans);
  prover_ = std::move(inst.prover);
  std::vector<crypto::PublicKey> pubs;
  for (const auto& k : keys_) pubs.push_back(k.public_key);
  verifier_ = std::make_unique<roles::Verifier>(params_, pubs);
  overhead_ = compute_overhead(topo_, params_.theta_claimed);

  const DurationNs timeout =
      opts_.challenger_timeout > 0
          ? opts_.challenger_timeout
          : static_cast<DurationNs>(std::llround(opts_.timeout_factor * static_cast<double>(params_.duration)));
  const DurationNs deadline_offset = opts_.verifier_deadline > 0 ? opts_.verifier_deadline
                                                                 : l_ref + timeout + 2 * l_ref + 100 * kNanosPerMilli;
  deadline_ = params_.t0 + static_cast<TimeNs>(deadline_offset);
  const DurationNs horizon_offset = opts_.horizon > 0 ? opts_.horizon : deadline_offset + 100 * kNanosPerMilli;
  const TimeNs horizon = params_.t0 + static_cast<TimeNs>(horizon_offset);

  uplink_busy_.assign(n, 0);
  result_.challengers.resize(n);
  const TimeNs prep = params_.t0 > static_cast<TimeNs>(kNanosPerSecond / 2) ? params_.t0 - kNanosPerSecond / 2 : 0;

  for (ChallengerId i = 0; i < n; ++i) {
    challengers_.emplace_back(i, keys_[i], params_, sched.first_send[i], latencies[i], prover_keys.public_key);
    auto& out = result_.challengers[i];
    out.id = i;
    out.corrupt = plans_[i].corrupt;
    out.clock_offset = offsets_[i];
    out.latency = latencies[i];
  }
  for (ChallengerId i = 0; i < n; ++i) {
    const auto local_prep = static_cast<TimeNs>(std::max<DurationNs>(0, static_cast<DurationNs>(prep) + offsets_[i]));
    auto start = challengers_[i].start(local_prep);
    result_.challengers[i].slip = start.slip;
    const auto& plan = plans_[i];
    const TimeNs first = challengers_[i].first_send();
    for (auto& s : start.sends) {
      TimeNs local = plan.burst ? first : s.at;
      local += static_cast<TimeNs>(plan.send_delay);
      loop_.at(true_time(i, local), [this, i, q = s.probe, pkt = std::move(s.packet)] { send_probe(i, q, pkt); });
    }
    loop_.at(true_time(i, first + static_cast<TimeNs>(timeout)), [this, i] {
      if (challengers_[i].on_timeout(local_time(i))) {
        ++result_.not_terminate_count;
        trace(cid(i), "not_terminate");
      }
    });
  }
  loop_.at(params_.t0, [this] {
    trace("prover", "start");
    if (auto r = prover_->on_start(loop_.now())) emit_responses(std::move(*r));
  });
  loop_.at(deadline_, [this] { verifier_deadline(); });

  loop_.run(horizon);

  result_.output = verifier_->output();
  result_.terminated = result_.output.has_value();
  result_.verifier_log = verifier_->log();
  for (ChallengerId i = 0; i < n; ++i) {
    auto& out = result_.challengers[i];
    out.delta = challengers_[i].rtt();
    out.phase = roles::to_string(challengers_[i].phase());
    out.not_terminate = challengers_[i].declared_not_terminate();
    if (auto it = verifier_->counted().find(i); it != verifier_->counted().end()) out.counted = it->second;
    if (auto it = verifier_->verdicts().find(i); it != verifier_->verdicts().end()) out.verdict = roles::to_string(it->second);
  }
  return std::move(result_);
}

void Simulation::send_probe(ChallengerId i, std::uint32_t q, const Bytes& packet) {
  const auto& plan = plans_[i];
  const auto node = cid(i);
  if (!plan.sends || (plan.drop_fraction > 0 && adv_rng_.bernoulli(plan.drop_fraction))) {
    ++result_.drops.withheld;
    trace(node, "withhold", "probe=" + std::to_string(q));
    return;
  }
  ++result_.challengers[i].probes_sent;
  const auto wire_bytes = wire::on_wire_size(packet.size());
  result_.challenge_bytes += wire_bytes;
  if (plan.side_channel) {
    trace(node, "send", "probe=" + std::to_string(q) + " via=side");
    loop_.at(loop_.now() + static_cast<TimeNs>(topo_.side_channel_delay),
             [this, pkt = packet] { prover_receive(pkt, "side"); });
    return;
  }
  const auto& link = topo_.uplinks[i];
  const TimeNs now = loop_.now();
  const TimeNs start = std::max(now, uplink_busy_[i]);
  const auto backlog = static_cast<std::uint64_t>(static_cast<double>(start - now) * link.rate_bps / 8e9);
  if (backlog + wire_bytes > link.queue_capacity) {
    ++result_.drops.uplink_queue;
    trace(node, "drop", "probe=" + std::to_string(q) + " where=uplink_queue");
    return;
  }
  const TimeNs finish = start + static_cast<TimeNs>(serialization_ns(wire_bytes, link.rate_bps));
  uplink_busy_[i] = finish;
  trace(node, "send", "probe=" + std::to_string(q));
  if (net_rng_.bernoulli(link.loss_rate)) {
    ++result_.drops.loss;
    trace(node, "drop", "probe=" + std::to_string(q) + " where=uplink_loss");
    return;
  }
  const TimeNs arrive = finish + static_cast<TimeNs>(link.propagation + link.jitter.draw_jitter(net_rng_));
  loop_.at(arrive, [this, i, q, pkt = packet] { backhaul_enqueue(i, q, pkt); });
}

void Simulation::backhaul_enqueue(ChallengerId i, std::uint32_t q, Bytes packet) {
  const auto wire_bytes = wire::on_wire_size(packet.size());
  if (backhaul_bytes_in_system_ + wire_bytes > topo_.backhaul.queue_capacity) {
    ++result_.drops.backhaul_queue;
    trace("backhaul", "drop", cid(i) + " probe=" + std::to_string(q) + " queued=" +
                                  std::to_string(backhaul_bytes_in_system_));
    return;
  }
  backhaul_bytes_in_system_ += wire_bytes;
  backhaul_queue_.push_back({i, q, std::move(packet)});
  trace("backhaul", "enqueue", cid(i) + " probe=" + std::to_string(q) + " queued=" +
                                   std::to_string(backhaul_bytes_in_system_));
  if (!backhaul_busy_) backhaul_start();
}

void Simulation::backhaul_start() {
  if (backhaul_queue_.empty()) {
    backhaul_busy_ = false;
    return;
  }
  backhaul_busy_ = true;
  const auto wire_bytes = wire::on_wire_size(backhaul_queue_.front().bytes.size());
  const double rate = topo_.effective_backhaul_rate(since_t0(), true);
  loop_.at(loop_.now() + static_cast<TimeNs>(serialization_ns(wire_bytes, rate)), [this] { backhaul_depart(); });
}

void Simulation::backhaul_depart() {
  auto item = std::move(backhaul_queue_.front());
  backhaul_queue_.pop_front();
  const auto wire_bytes = wire::on_wire_size(item.bytes.size());
  backhaul_bytes_in_system_ -= wire_bytes;
  result_.backhaul_bytes += wire_bytes;
  trace("backhaul", "depart", cid(item.from) + " probe=" + std::to_string(item.probe) + " bytes=" +
                                  std::to_string(wire_bytes));
  const auto& link = topo_.backhaul;
  if (net_rng_.bernoulli(link.loss_rate)) {
    ++result_.drops.loss;
    trace("backhaul", "drop", cid(item.from) + " probe=" + std::to_string(item.probe) + " where=backhaul_loss");
  } else {
    const TimeNs arrive = loop_.now() + static_cast<TimeNs>(link.propagation + link.jitter.draw_jitter(net_rng_));
    loop_.at(arrive, [this, pkt = std::move(item.bytes)] { prover_receive(pkt, "backhaul"); });
  }
  backhaul_start();
}

void Simulation::prover_receive(Bytes packet, const char* via) {
  wire::ChallengePacket p;
  try {
    p = wire::decode_as<wire::ChallengePacket>(packet);
  } catch (const wire::DecodeError& e) {
    trace("prover", "reject", e.what());
    return;
  }
  const auto q = roles::probe_of_seq(params_, p.base_seq);
  trace("prover", "receive", cid(p.challenger_id) + " probe=" + std::to_string(q) + " via=" + via);
  if (auto r = prover_->on_packet(p, loop_.now())) {
    result_.response_time = loop_.now();
    trace("prover", "threshold", "total=" + std::to_string(prover_->total_count()));
    loop_.at(loop_.now() + static_cast<TimeNs>(overhead_), [this, rs = std::move(*r)]() mutable {
      emit_responses(std::move(rs));
    });
  }
}

void Simulation::emit_responses(std::vector<wire::ResponsePacket> responses) {
  if (!result_.response_time) result_.response_time = loop_.now();
  trace("prover", "respond", "root=" + responses.front().merkle_root.hex().substr(0, 16));
  const auto verifications = prover_->verification_messages();
  for (ChallengerId i = 0; i < params_.n; ++i) {
    auto resp = wire::encode(responses[i]);
    const auto d1 = downstream_delay(topo_, i, wire::on_wire_size(resp.size()), net_rng_);
    loop_.at(loop_.now() + static_cast<TimeNs>(d1), [this, i, b = std::move(resp)] { challenger_response(i, b); });
    auto ver = wire::encode(verifications[i]);
    const auto d2 = downstream_delay(topo_, i, wire::on_wire_size(ver.size()), net_rng_);
    // The verification message follows the response on the same path.
    loop_.at(loop_.now() + static_cast<TimeNs>(std::max(d1, d2) + 1),
             [this, i, b = std::move(ver)] { challenger_verification(i, b); });
  }
  auto rep = wire::encode(prover_->report());
  loop_.at(loop_.now() + static_cast<TimeNs>(topo_.control_delay),
           [this, b = std::move(rep)] { verifier_prover_report(b); });
}

void Simulation::challenger_response(ChallengerId i, Bytes bytes) {
  const auto resp = wire::decode_as<wire::ResponsePacket>(bytes);
  if (challengers_[i].on_response(resp, local_time(i))) {
    trace(cid(i), "response", "delta=" + std::to_string(*challengers_[i].rtt()));
  } else {
    trace(cid(i), "response_ignored");
  }
}

void Simulation::challenger_verification(ChallengerId i, Bytes bytes) {
  const auto& plan = plans_[i];
  std::optional<wire::ChallengerReport> report;
  try {
    report = challengers_[i].on_verification(wire::decode_as<wire::VerificationMessage>(bytes));
  } catch (const wire::DecodeError& e) {
    trace(cid(i), "verification_rejected", e.what());
    return;
  }
  if (!report) return;
  trace(cid(i), "verified", std::string("status=") +
                                (report->status == wire::ReportStatus::ok ? "ok" : challengers_[i].failure_reason()));
  if (!plan.reports) {
    trace(cid(i), "report_withheld");
    return;
  }
  if (plan.rtt_override) report->rtt_ns = *plan.rtt_override;
  if (plan.count_override) report->packets_acknowledged = *plan.count_override;
  if (plan.claim_failure) report->status = wire::ReportStatus::verification_failed;
  auto enc = wire::encode(*report);
  loop_.at(loop_.now() + static_cast<TimeNs>(topo_.control_delay), [this, b = std::move(enc)] { verifier_report(b); });
}

void Simulation::verifier_report(Bytes bytes) {
  wire::ChallengerReport report;
  try {
    report = wire::decode_as<wire::ChallengerReport>(bytes);
  } catch (const wire::DecodeError& e) {
    trace("verifier", "report_rejected", e.what());
    return;
  }
  const auto out = verifier_->on_report(report);
  const auto verdict = verifier_->last_verdict();
  trace("verifier", "report", cid(report.challenger_id) + " " + roles::to_string(verdict));
  note_output(out);
}

void Simulation::verifier_prover_report(Bytes bytes) {
  const auto report = wire::decode_as<wire::ProverReport>(bytes);
  const auto out = verifier_->on_prover_report(report);
  trace("verifier", "prover_report", "root=" + report.merkle_root.hex().substr(0, 16));
  note_output(out);
}

void Simulation::verifier_deadline() {
  trace("verifier", "deadline");
  for (auto id : verifier_->dispute_candidates()) {
    const auto req = wire::decode_as<wire::DisputeRequest>(wire::encode(wire::DisputeRequest{id}));
    const auto sub = prover_->on_dispute_request(req.challenger_id);
    if (!sub) {
      trace("verifier", "dispute_unanswered", cid(id));
      continue;
    }
    wire::DisputeSubmission decoded;
    try {
      decoded = wire::decode_as<wire::DisputeSubmission>(wire::encode(*sub));
    } catch (const std::exception& e) {
      trace("verifier", "dispute_malformed", cid(id) + " " + e.what());
      continue;
    }
    const auto outcome = verifier_->resolve_dispute(decoded);
    result_.disputes.emplace_back(id, outcome);
    trace("verifier", "dispute", cid(id) + " " + roles::to_string(outcome));
  }
  note_output(verifier_->on_deadline(loop_.now()));
}

void Simulation::note_output(const std::optional<roles::PoBOutput>& out) {
  if (!out) return;
  std::ostringstream d;
  d.precision(17);
  d << "cnt=" << out->cnt << " delta=" << out->delta_median << " measured_bps=" << out->measured_bps
    << " guaranteed_bps=" << out->guaranteed_bps;
  trace("verifier", "output", d.str());
}

}  // namespace

SimResult run_scenario(const Topology& topology, const schedule::ChallengeParams& params,
                       const adversary::AttackConfig& attack, std::uint64_t seed, const SimOptions& options) {
  Simulation sim(topology, params, attack, seed, options);
  return sim.run();
}

std::vector<DurationNs> ping(const Topology& topology, ChallengerId challenger, std::uint32_t count, Rng& rng) {
  if (challenger >= topology.uplinks.size()) throw InputError("no such challenger " + std::to_string(challenger));
  const auto& u = topology.uplinks[challenger];
  const auto& b = topology.backhaul;
  const DurationNs fixed =
      2 * (serialization_ns(kPingWireBytes, u.rate_bps) + u.propagation + serialization_ns(kPingWireBytes, b.rate_bps) +
           b.propagation);
  std::vector<DurationNs> samples;
  for (std::uint32_t s = 0; s < count; ++s) {
    bool lost = false;
    for (int leg = 0; leg < 2; ++leg) {
      lost |= rng.bernoulli(u.loss_rate);
      lost |= rng.bernoulli(b.loss_rate);
    }
    const DurationNs jitter = u.jitter.draw_jitter(rng) + b.jitter.draw_jitter(rng) + b.jitter.draw_jitter(rng) +
                              u.jitter.draw_jitter(rng);
    if (!lost) samples.push_back(fixed + jitter);
  }
  if (samples.empty()) throw SimError("every ping to challenger " + std::to_string(challenger) + " was lost");
  return samples;
}

}  // namespace pob::netsim
