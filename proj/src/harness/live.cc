#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <exception>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "pob/harness/live.h"

namespace pob::harness::live {

namespace {

using Clock = std::chrono::steady_clock;

// Monotonic time shifted onto the Unix epoch once at construction.
class LiveClock {
 public:
  LiveClock() {
    const auto wall = std::chrono::duration_cast<std::chrono::nanoseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    anchor_ = wall - mono();
  }
  TimeNs now() const { return static_cast<TimeNs>(mono() + anchor_); }
  void sleep_until(TimeNs t) const {
    const auto target = Clock::time_point(std::chrono::nanoseconds(static_cast<std::int64_t>(t) - anchor_));
    std::this_thread::sleep_until(target);
  }

 private:
  static std::int64_t mono() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count();
  }
  std::int64_t anchor_ = 0;
};

sockaddr_in resolve(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) throw ConfigError("live", "address '" + hostport + "' is not host:port");
  const auto host = hostport.substr(0, colon);
  const auto port = hostport.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw ConfigError("live", "cannot resolve '" + hostport + "'");
  }
  sockaddr_in out{};
  std::memcpy(&out, res->ai_addr, sizeof(out));
  freeaddrinfo(res);
  return out;
}

bool same_addr(const sockaddr_in& a, const sockaddr_in& b) {
  return a.sin_addr.s_addr == b.sin_addr.s_addr && a.sin_port == b.sin_port;
}

struct Datagram {
  Bytes bytes;
  sockaddr_in from{};
  TimeNs at = 0;
};

class UdpSocket {
 public:
  UdpSocket(const std::string& listen, const LiveClock& clock) : clock_(clock) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw LiveError(std::string("socket: ") + std::strerror(errno));
    int buf = 8 << 20;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &buf, sizeof(buf));
    const auto addr = resolve(listen);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd_);
      throw LiveError("bind " + listen + ": " + err);
    }
  }
  ~UdpSocket() { ::close(fd_); }
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  void send(const sockaddr_in& to, const Bytes& msg) {
    if (msg.size() <= kMaxDatagram) {
      raw_send(to, msg);
      return;
    }
    const auto id = next_id_++;
    const auto count = static_cast<std::uint16_t>((msg.size() + kMaxDatagram - 1) / kMaxDatagram);
    for (std::uint16_t i = 0; i < count; ++i) {
      Bytes frag = {0xF0, 1, 0, 0};
      for (int s = 24; s >= 0; s -= 8) frag.push_back(static_cast<std::uint8_t>(id >> s));
      frag.push_back(static_cast<std::uint8_t>(i >> 8));
      frag.push_back(static_cast<std::uint8_t>(i));
      frag.push_back(static_cast<std::uint8_t>(count >> 8));
      frag.push_back(static_cast<std::uint8_t>(count));
      const auto begin = static_cast<std::size_t>(i) * kMaxDatagram;
      const auto end = std::min(msg.size(), begin + kMaxDatagram);
      frag.insert(frag.end(), msg.begin() + static_cast<std::ptrdiff_t>(begin),
                  msg.begin() + static_cast<std::ptrdiff_t>(end));
      raw_send(to, frag);
    }
  }

  /// Waits until `until` for the next complete message.
  std::optional<Datagram> receive(TimeNs until) {
    bool waited = false;
    while (true) {
      // Try the socket first: under load a datagram is usually already queued
      // and the poll would be a wasted system call.
      Datagram d;
      socklen_t len = sizeof(d.from);
      const auto got =
          ::recvfrom(fd_, buf_.data(), buf_.size(), MSG_DONTWAIT, reinterpret_cast<sockaddr*>(&d.from), &len);
      if (got < 0) {
        if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
          throw LiveError(std::string("recvfrom: ") + std::strerror(errno));
        }
        const auto now = clock_.now();
        if (waited && now >= until) return std::nullopt;
        const std::int64_t wait = until > now ? static_cast<std::int64_t>(until - now) : 0;
        pollfd p{fd_, POLLIN, 0};
        timespec ts{static_cast<time_t>(wait / 1'000'000'000), static_cast<long>(wait % 1'000'000'000)};
        const int rc = ::ppoll(&p, 1, &ts, nullptr);
        if (rc < 0 && errno != EINTR) throw LiveError(std::string("poll: ") + std::strerror(errno));
        if (rc == 0) return std::nullopt;
        waited = true;
        continue;
      }
      d.at = clock_.now();
      d.bytes.assign(buf_.begin(), buf_.begin() + got);
      if (d.bytes.size() >= 12 && d.bytes[0] == 0xF0) {
        if (auto whole = reassemble(d)) return whole;
        continue;
      }
      return d;
    }
  }

 private:
  void raw_send(const sockaddr_in& to, const Bytes& msg) {
    while (::sendto(fd_, msg.data(), msg.size(), 0, reinterpret_cast<const sockaddr*>(&to), sizeof(to)) < 0) {
      if (errno == ENOBUFS || errno == EAGAIN || errno == EINTR) {
        std::this_thread::yield();
        continue;
      }
      throw LiveError(std::string("sendto: ") + std::strerror(errno));
    }
  }

  std::optional<Datagram> reassemble(const Datagram& d) {
    const std::uint32_t id = (std::uint32_t{d.bytes[4]} << 24) | (std::uint32_t{d.bytes[5]} << 16) |
                             (std::uint32_t{d.bytes[6]} << 8) | d.bytes[7];
    const std::uint16_t index = static_cast<std::uint16_t>((d.bytes[8] << 8) | d.bytes[9]);
    const std::uint16_t count = static_cast<std::uint16_t>((d.bytes[10] << 8) | d.bytes[11]);
    if (count == 0 || index >= count) return std::nullopt;
    const auto key = std::make_pair(std::make_pair(d.from.sin_addr.s_addr, d.from.sin_port), id);
    auto& parts = partial_[key];
    parts.resize(count);
    parts[index] = Bytes(d.bytes.begin() + 12, d.bytes.end());
    for (const auto& p : parts) {
      if (p.empty()) return std::nullopt;
    }
    Datagram whole{{}, d.from, d.at};
    for (const auto& p : parts) whole.bytes.insert(whole.bytes.end(), p.begin(), p.end());
    partial_.erase(key);
    return whole;
  }

  const LiveClock& clock_;
  int fd_ = -1;
  std::vector<std::uint8_t> buf_ = std::vector<std::uint8_t>(65536);
  std::uint32_t next_id_ = 0;
  std::map<std::pair<std::pair<std::uint32_t, std::uint16_t>, std::uint32_t>, std::vector<Bytes>> partial_;
};

std::optional<wire::Message> parse(const Datagram& d) {
  try {
    return wire::decode(d.bytes);
  } catch (const wire::DecodeError& e) {
    spdlog::debug("dropping undecodable datagram: {}", e.what());
    return std::nullopt;
  }
}

struct Session {
  ScenarioConfig config;
  LiveConfig live;
  schedule::ChallengeParams params;
  netsim::RoundKeys keys;
  sockaddr_in verifier{};
  sockaddr_in prover{};
  std::vector<sockaddr_in> challengers;
  DurationNs l_ref = 0;
  TimeNs deadline = 0;
};

Session make_session(const ScenarioConfig& config, TimeNs t0) {
  config.validate();
  if (!config.live) throw ConfigError("live", "section required for live mode");
  Session s;
  s.config = config;
  s.live = *config.live;
  s.params = config.to_params();
  s.params.t0 = t0;
  Bytes seed_msg = {'p', 'o', 'b', '-', 'l', 'i', 'v', 'e'};
  for (int sh = 56; sh >= 0; sh -= 8) seed_msg.push_back(static_cast<std::uint8_t>(s.live.key_seed >> sh));
  for (int sh = 56; sh >= 0; sh -= 8) seed_msg.push_back(static_cast<std::uint8_t>(t0 >> sh));
  s.params.m0 = crypto::sha256(seed_msg).bytes;
  s.keys = netsim::derive_keys(s.live.key_seed, s.params.n);
  s.verifier = resolve(s.live.verifier);
  s.prover = resolve(s.live.prover);
  for (const auto& c : s.live.challengers) s.challengers.push_back(resolve(c));
  s.l_ref = millis(s.live.l_ref_ms);
  s.deadline = t0 + static_cast<TimeNs>(millis(s.live.deadline_ms));
  return s;
}

RunReport empty_report(const Session& s) {
  RunReport r;
  r.name = s.config.name;
  r.mode = "live";
  r.theta_claimed_bps = s.params.theta_claimed;
  r.theta0_bps = s.params.theta0;
  r.n = s.params.n;
  r.f = s.params.f;
  r.k = s.params.k;
  r.duration_ns = s.params.duration;
  r.attack = "-";
  r.reference_bps = s.params.theta_claimed;
  return r;
}

RunReport run_challenger(const Session& s, ChallengerId id, const std::string& listen) {
  LiveClock clock;
  UdpSocket sock(listen, clock);
  const auto& prover = s.prover;

  std::vector<DurationNs> rtts;
  for (std::uint32_t j = 0; j < s.config.run.ping_count; ++j) {
    const auto sent = clock.now();
    sock.send(prover, wire::encode(wire::Ping{j}));
    while (auto d = sock.receive(sent + 200'000'000)) {
      const auto msg = parse(*d);
      const auto* pong = msg ? std::get_if<wire::Pong>(&*msg) : nullptr;
      if (pong != nullptr && pong->token == j) {
        rtts.push_back(static_cast<DurationNs>(d->at - sent));
        break;
      }
    }
  }
  if (rtts.empty()) throw LiveError("challenger " + std::to_string(id) + ": prover did not answer pings (timeout)");
  const auto latency = schedule::estimate_latency(rtts, s.config.to_sim_options().estimator);
  if (latency > s.l_ref) {
    spdlog::warn("challenger {}: latency {} ns exceeds l_ref {} ns; first probe will arrive late", id, latency, s.l_ref);
  }
  const TimeNs first_send = s.params.t0 + static_cast<TimeNs>(std::max<DurationNs>(0, s.l_ref - latency));
  spdlog::info("challenger {}: l = {} ns from {} pings, t_1 = t0 + {} ns", id, latency, rtts.size(),
               first_send - s.params.t0);

  roles::Challenger ch(id, s.keys.challengers[id], s.params, first_send, latency, s.keys.prover.public_key);
  auto start = ch.start(clock.now());
  if (start.slip > 0) spdlog::warn("challenger {}: started {} ns late", id, start.slip);

  UdpSocket out(listen.substr(0, listen.rfind(':')) + ":0", clock);
  std::thread sender([&] {
    for (const auto& send : start.sends) {
      clock.sleep_until(send.at);
      out.send(prover, send.packet);
    }
  });

  std::optional<wire::ChallengerReport> report;
  while (!report) {
    auto d = sock.receive(s.deadline);
    if (!d) break;
    const auto msg = parse(*d);
    if (!msg) continue;
    if (const auto* resp = std::get_if<wire::ResponsePacket>(&*msg)) {
      ch.on_response(*resp, d->at);
      spdlog::debug("challenger {}: response at t0 + {} ns, delta {}", id, d->at - s.params.t0, ch.rtt().value_or(-1));
    } else if (const auto* ver = std::get_if<wire::VerificationMessage>(&*msg)) {
      try {
        report = ch.on_verification(*ver);
      } catch (const wire::DecodeError& e) {
        spdlog::warn("challenger {}: bad verification message: {}", id, e.what());
      }
    }
  }
  sender.join();
  if (report) {
    sock.send(s.verifier, wire::encode(*report));
  } else {
    ch.on_timeout(clock.now());
    spdlog::warn("challenger {}: no verification by the deadline ({})", id, ch.failure_reason());
  }

  auto r = empty_report(s);
  RepetitionRecord rec;
  rec.terminated = report.has_value();
  rec.challenge_bytes = start.sends.size() * wire::kPacketBytes;
  ChallengerRecord c;
  c.id = id;
  c.delta_ns = ch.rtt();
  c.probes_sent = static_cast<std::uint32_t>(start.sends.size());
  c.latency_ns = latency;
  c.phase = roles::to_string(ch.phase());
  c.not_terminate = ch.declared_not_terminate();
  rec.not_terminate_count = c.not_terminate ? 1 : 0;
  rec.challengers.push_back(c);
  r.repetitions.push_back(rec);
  r.summarize();
  return r;
}

RunReport run_prover(const Session& s, const std::string& listen) {
  LiveClock clock;
  UdpSocket sock(listen, clock);
  roles::AdmissionPolicy admission;
  const auto slack = s.config.topology.admission_slack_ms;
  admission.enabled = slack >= 0;
  admission.reference = s.params.t0 + static_cast<TimeNs>(s.l_ref);
  admission.slack = millis(std::max(slack, 0.0));
  roles::Prover prover(s.keys.prover, s.params, 0, admission);

  const double rate = s.live.shaper_mbps * 1e6;
  struct Queued {
    TimeNs departs;
    Bytes bytes;
  };
  std::deque<Queued> queue;
  std::uint64_t queued_bytes = 0, dropped = 0, received = 0;
  TimeNs last_departure = 0;
  // Stay up for the verifier's disputes, which start at the deadline and wait 0.5 s each.
  const TimeNs end = s.deadline + 1'000'000'000 + 500'000'000ull * s.params.n;

  auto process = [&](const Bytes& bytes, TimeNs now) {
    wire::ChallengePacket pkt;
    try {
      pkt = wire::decode_as<wire::ChallengePacket>(bytes);
    } catch (const wire::DecodeError&) {
      return;
    }
    const auto responses = prover.on_packet(pkt, now);
    if (!responses) return;
    spdlog::info("prover: threshold reached at t0 + {} ns with {} probes (wall t0 + {} ns)", now - s.params.t0,
                 prover.total_count(), clock.now() - s.params.t0);
    for (ChallengerId i = 0; i < s.params.n; ++i) sock.send(s.challengers[i], wire::encode((*responses)[i]));
    for (const auto& v : prover.verification_messages()) sock.send(s.challengers[v.challenger_id], wire::encode(v));
    sock.send(s.verifier, wire::encode(prover.report()));
  };

  while (true) {
    const auto now = clock.now();
    while (!queue.empty() && queue.front().departs <= now) {
      queued_bytes -= queue.front().bytes.size();
      process(queue.front().bytes, queue.front().departs);
      queue.pop_front();
    }
    if (now >= end) break;
    const TimeNs wake = queue.empty() ? end : std::min(end, queue.front().departs);
    auto d = sock.receive(wake);
    if (!d) continue;
    if (d->bytes.size() >= 1 && d->bytes[0] == static_cast<std::uint8_t>(wire::MessageType::challenge)) {
      ++received;
      if (rate <= 0) {
        process(d->bytes, d->at);
        continue;
      }
      const auto size = wire::on_wire_size(d->bytes.size());
      if (queued_bytes + size > s.live.shaper_queue_bytes) {
        ++dropped;
        continue;
      }
      const TimeNs start = std::max(d->at, last_departure);
      last_departure = start + static_cast<TimeNs>(netsim::serialization_ns(size, rate));
      queued_bytes += size;
      queue.push_back({last_departure, std::move(d->bytes)});
      continue;
    }
    const auto msg = parse(*d);
    if (!msg) continue;
    if (const auto* ping = std::get_if<wire::Ping>(&*msg)) {
      sock.send(d->from, wire::encode(wire::Pong{ping->token}));
    } else if (const auto* req = std::get_if<wire::DisputeRequest>(&*msg)) {
      if (auto sub = prover.on_dispute_request(req->challenger_id)) sock.send(d->from, wire::encode(*sub));
    }
  }
  spdlog::info("prover: {} challenge packets received, {} dropped by the shaper", received, dropped);

  auto r = empty_report(s);
  RepetitionRecord rec;
  rec.terminated = prover.responded();
  rec.drops.backhaul_queue = dropped;
  rec.backhaul_bytes = (received - dropped) * wire::kPacketBytes;
  r.repetitions.push_back(rec);
  r.summarize();
  return r;
}

RunReport run_verifier(const Session& s, const std::string& listen) {
  LiveClock clock;
  UdpSocket sock(listen, clock);
  std::vector<crypto::PublicKey> pubs;
  for (const auto& k : s.keys.challengers) pubs.push_back(k.public_key);
  roles::Verifier verifier(s.params, pubs);
  const bool lazy = s.params.verifier_mode == schedule::VerifierMode::lazy;
  std::map<ChallengerId, DurationNs> deltas;

  std::optional<roles::PoBOutput> output;
  while (!(lazy && output)) {
    auto d = sock.receive(s.deadline);
    if (!d) break;
    const auto msg = parse(*d);
    if (!msg) continue;
    if (const auto* pr = std::get_if<wire::ProverReport>(&*msg)) {
      if (auto o = verifier.on_prover_report(*pr)) output = o;
    } else if (const auto* cr = std::get_if<wire::ChallengerReport>(&*msg)) {
      if (cr->challenger_id < s.params.n && !deltas.contains(cr->challenger_id)) {
        deltas[cr->challenger_id] = static_cast<DurationNs>(cr->rtt_ns);
      }
      if (auto o = verifier.on_report(*cr)) output = o;
    }
  }

  RepetitionRecord rec;
  if (!verifier.output()) {
    for (auto id : verifier.dispute_candidates()) {
      sock.send(s.prover, wire::encode(wire::DisputeRequest{id}));
      const auto until = clock.now() + 500'000'000;
      while (auto d = sock.receive(until)) {
        const auto msg = parse(*d);
        const auto* sub = msg ? std::get_if<wire::DisputeSubmission>(&*msg) : nullptr;
        if (sub == nullptr || sub->challenger_id != id) continue;
        const auto outcome = verifier.resolve_dispute(*sub);
        rec.disputes.emplace_back(id, roles::to_string(outcome));
        break;
      }
    }
    verifier.on_deadline(clock.now());
  }
  for (const auto& line : verifier.log()) spdlog::debug("verifier: {}", line);

  auto r = empty_report(s);
  rec.output = verifier.output();
  rec.terminated = rec.output.has_value();
  for (ChallengerId i = 0; i < s.params.n; ++i) {
    ChallengerRecord c;
    c.id = i;
    if (auto it = deltas.find(i); it != deltas.end()) c.delta_ns = it->second;
    if (c.delta_ns && *c.delta_ns > 0 && rec.output) {
      c.implied_bps = static_cast<double>(rec.output->cnt) * s.params.packet_bytes * 8.0 * 1e9 /
                      static_cast<double>(*c.delta_ns);
    }
    if (auto it = verifier.counted().find(i); it != verifier.counted().end()) c.counted = it->second;
    if (auto it = verifier.verdicts().find(i); it != verifier.verdicts().end()) c.verdict = roles::to_string(it->second);
    rec.challengers.push_back(c);
  }
  r.repetitions.push_back(rec);
  r.summarize();
  if (rec.output) {
    spdlog::info("verifier: measured {:.2f} Mbps, guaranteed {:.2f} Mbps", rec.output->measured_bps / 1e6,
                 rec.output->guaranteed_bps / 1e6);
  } else {
    spdlog::warn("verifier: no output by the deadline");
  }
  return r;
}

}  // namespace

Role role_from_string(const std::string& s) {
  if (s == "challenger") return Role::challenger;
  if (s == "prover") return Role::prover;
  if (s == "verifier") return Role::verifier;
  throw InputError("unknown role '" + s + "' (expected challenger, prover or verifier)");
}

TimeNs resolve_t0(const ScenarioConfig& config) {
  if (config.live && config.live->t0_unix_ms != 0) return config.live->t0_unix_ms * 1'000'000;
  const auto now = static_cast<TimeNs>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
  constexpr TimeNs step = 10'000'000'000;
  return ((now + 3'000'000'000) / step + 1) * step;
}

RunReport run_role(const ScenarioConfig& config, const RoleOptions& options) {
  const auto t0 = options.t0 != 0 ? options.t0 : resolve_t0(config);
  auto s = make_session(config, t0);
  if (!options.peer.empty() && options.role == Role::challenger) s.prover = resolve(options.peer);
  switch (options.role) {
    case Role::verifier:
      return run_verifier(s, options.listen.empty() ? s.live.verifier : options.listen);
    case Role::prover:
      return run_prover(s, options.listen.empty() ? s.live.prover : options.listen);
    case Role::challenger: {
      if (options.listen.empty()) throw ConfigError("listen", "a challenger needs --listen with its live.challengers address");
      const auto addr = resolve(options.listen);
      for (ChallengerId i = 0; i < s.challengers.size(); ++i) {
        if (same_addr(addr, s.challengers[i])) return run_challenger(s, i, options.listen);
      }
      throw ConfigError("listen", options.listen + " is not one of live.challengers");
    }
  }
  throw InputError("unknown role");
}

RunReport run_local(const ScenarioConfig& config) {
  auto cfg = config;
  if (cfg.live && cfg.live->t0_unix_ms == 0) {
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    cfg.live->t0_unix_ms = static_cast<std::uint64_t>(now) + 3000;
  }
  const auto s = make_session(cfg, resolve_t0(cfg));

  std::vector<std::exception_ptr> errors(s.params.n + 2);
  RunReport verifier_report;
  std::vector<std::thread> threads;
  threads.emplace_back([&] {
    try {
      verifier_report = run_verifier(s, s.live.verifier);
    } catch (...) {
      errors[0] = std::current_exception();
    }
  });
  threads.emplace_back([&] {
    try {
      run_prover(s, s.live.prover);
    } catch (...) {
      errors[1] = std::current_exception();
    }
  });
  // Give the prover a moment to bind before the first ping.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  for (ChallengerId i = 0; i < s.params.n; ++i) {
    threads.emplace_back([&, i] {
      try {
        run_challenger(s, i, s.live.challengers[i]);
      } catch (...) {
        errors[2 + i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return verifier_report;
}

}  // namespace pob::harness::live
