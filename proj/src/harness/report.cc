#include <cmath>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pob/harness/report.h"

namespace pob::harness {

using nlohmann::json;

namespace {

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

json output_json(const roles::PoBOutput& o) {
  return {{"measured_bps", o.measured_bps},
          {"guaranteed_bps", o.guaranteed_bps},
          {"delta_median_ns", o.delta_median},
          {"accepted_reports", o.accepted_reports},
          {"cnt", o.cnt}};
}

roles::PoBOutput output_from_json(const json& j) {
  roles::PoBOutput o;
  o.measured_bps = j.at("measured_bps").get<double>();
  o.guaranteed_bps = j.at("guaranteed_bps").get<double>();
  o.delta_median = j.at("delta_median_ns").get<DurationNs>();
  o.accepted_reports = j.at("accepted_reports").get<std::uint32_t>();
  o.cnt = j.at("cnt").get<std::uint64_t>();
  return o;
}

bool feeds_colluder(const adversary::AttackConfig& attack, const adversary::CorruptChallenger& c) {
  return attack.prover == adversary::ProverStrategy::colluding &&
         (c.strategy == adversary::ChallengerStrategy::rush || c.strategy == adversary::ChallengerStrategy::share_keys);
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

std::pair<std::optional<double>, std::optional<double>> mean_stddev(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, std::nullopt};
  double sq = 0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

void RunReport::summarize() {
  summary = {};
  summary.runs = static_cast<std::uint32_t>(repetitions.size());
  std::vector<double> measured, guaranteed, estimates;
  double bytes = 0;
  for (const auto& r : repetitions) {
    if (r.terminated) ++summary.terminated;
    if (r.output) {
      measured.push_back(r.output->measured_bps);
      guaranteed.push_back(r.output->guaranteed_bps);
    }
    if (r.ladder) estimates.push_back(r.ladder->estimate_bps);
    bytes += static_cast<double>(r.challenge_bytes);
  }
  std::tie(summary.measured_mean_bps, summary.measured_stddev_bps) = mean_stddev(measured);
  std::tie(summary.guaranteed_mean_bps, summary.guaranteed_stddev_bps) = mean_stddev(guaranteed);
  std::tie(summary.estimate_mean_bps, summary.estimate_stddev_bps) = mean_stddev(estimates);
  if (!repetitions.empty()) summary.challenge_bytes_mean = bytes / static_cast<double>(repetitions.size());
}

std::string attack_label(const adversary::AttackConfig& attack) {
  if (attack.corrupt.empty() && attack.prover == adversary::ProverStrategy::honest) return "-";
  using S = adversary::ChallengerStrategy;
  bool rushing = false, withholding = false;
  for (const auto& c : attack.corrupt) {
    rushing |= c.strategy == S::rush || c.strategy == S::share_keys;
    withholding |= c.strategy == S::withhold_all || c.strategy == S::withhold_fraction || c.strategy == S::delay;
  }
  if (rushing && !withholding) return "Rushing";
  if (withholding && !rushing) return "Withholding";
  std::string label;
  for (const auto& c : attack.corrupt) {
    if (!label.empty()) label += "+";
    label += adversary::to_string(c.strategy);
  }
  if (attack.prover != adversary::ProverStrategy::honest) {
    label += label.empty() ? "" : "/";
    label += adversary::to_string(attack.prover);
  }
  return label;
}

double reference_bandwidth(const schedule::ChallengeParams& params, const adversary::AttackConfig& attack) {
  std::uint32_t feeders = 0;
  for (const auto& c : attack.corrupt) feeders += feeds_colluder(attack, c) ? 1 : 0;
  const double honest_senders = static_cast<double>(params.n - params.f);
  if (feeders == 0 || feeders >= params.n - params.f) return params.theta_claimed;
  return params.theta_claimed * honest_senders / (honest_senders - feeders);
}

RepetitionRecord record_from_sim(const netsim::SimResult& sim, std::uint32_t repetition, std::uint64_t seed) {
  RepetitionRecord r;
  r.repetition = repetition;
  r.seed = seed;
  r.terminated = sim.terminated;
  r.output = sim.output;
  if (sim.response_time) r.response_time_ns = static_cast<DurationNs>(*sim.response_time - sim.params.t0);
  r.not_terminate_count = sim.not_terminate_count;
  r.drops = sim.drops;
  r.challenge_bytes = sim.challenge_bytes;
  r.backhaul_bytes = sim.backhaul_bytes;
  for (const auto& [id, outcome] : sim.disputes) r.disputes.emplace_back(id, roles::to_string(outcome));
  for (const auto& c : sim.challengers) {
    ChallengerRecord cr;
    cr.id = c.id;
    cr.corrupt = c.corrupt;
    cr.delta_ns = c.delta;
    if (c.delta && *c.delta > 0 && sim.output) {
      cr.implied_bps = static_cast<double>(sim.output->cnt) * sim.params.packet_bytes * 8.0 * 1e9 /
                       static_cast<double>(*c.delta);
    }
    cr.counted = c.counted;
    cr.probes_sent = c.probes_sent;
    cr.latency_ns = c.latency;
    cr.clock_offset_ns = c.clock_offset;
    cr.phase = c.phase;
    cr.not_terminate = c.not_terminate;
    cr.verdict = c.verdict;
    r.challengers.push_back(cr);
  }
  return r;
}

SimulateOutput simulate(const ScenarioConfig& config) {
  config.validate();
  const auto topology = config.to_topology();
  const auto options = config.to_sim_options();
  SimulateOutput out;
  auto& rep = out.report;
  rep.name = config.name;
  rep.attack = attack_label(config.attack);

  for (std::uint32_t r = 0; r < config.run.repetitions; ++r) {
    const auto seed = derive_seed(config.run.seed, r);
    auto params = config.to_params();
    Rng m0_rng(derive_seed(seed, 6));
    params.m0 = m0_rng.bytes32();
    if (r == 0) {
      rep.theta_claimed_bps = params.theta_claimed;
      rep.theta0_bps = params.theta0;
      rep.n = params.n;
      rep.f = params.f;
      rep.k = params.k;
      rep.duration_ns = params.duration;
      rep.reference_bps = reference_bandwidth(params, config.attack);
    }
    if (config.ladder) {
      const auto ladder = abw::run_ladder(config.to_ladder(), topology, params, config.attack, seed, options);
      // The repetition's round-level fields describe the last rung that ran.
      auto rec = record_from_sim(ladder.rungs.back().sim, r, seed);
      LadderRecord lr{ladder.estimate_bps, ladder.below_floor, ladder.reached_max, {}};
      for (const auto& rung : ladder.rungs) {
        lr.rungs.push_back({rung.claimed_bps, rung.terminated, rung.not_terminate_count,
                            rung.output ? std::optional<double>(rung.output->measured_bps) : std::nullopt});
      }
      rec.ladder = lr;
      spdlog::info("{} rep {}: ladder estimate {:.2f} Mbps over {} rungs", config.name, r, lr.estimate_bps / 1e6,
                   lr.rungs.size());
      if (options.record_trace) out.traces.push_back(ladder.rungs.back().sim.trace_text());
      rep.repetitions.push_back(std::move(rec));
    } else {
      const auto sim = netsim::run_scenario(topology, params, config.attack, seed, options);
      if (sim.output) {
        spdlog::info("{} rep {}: measured {:.2f} Mbps, guaranteed {:.2f} Mbps", config.name, r,
                     sim.output->measured_bps / 1e6, sim.output->guaranteed_bps / 1e6);
      } else {
        spdlog::warn("{} rep {}: no output ({} not_terminate)", config.name, r, sim.not_terminate_count);
      }
      if (options.record_trace) out.traces.push_back(sim.trace_text());
      rep.repetitions.push_back(record_from_sim(sim, r, seed));
    }
  }
  rep.summarize();
  return out;
}

json to_json(const RunReport& report) {
  json reps = json::array();
  for (const auto& r : report.repetitions) {
    json j{{"repetition", r.repetition},
           {"seed", r.seed},
           {"terminated", r.terminated},
           {"not_terminate_count", r.not_terminate_count},
           {"drops",
            {{"backhaul_queue", r.drops.backhaul_queue},
             {"uplink_queue", r.drops.uplink_queue},
             {"loss", r.drops.loss},
             {"withheld", r.drops.withheld}}},
           {"challenge_bytes", r.challenge_bytes},
           {"backhaul_bytes", r.backhaul_bytes}};
    if (r.output) j["output"] = output_json(*r.output);
    put_opt(j, "response_time_ns", r.response_time_ns);
    json disputes = json::array();
    for (const auto& [id, outcome] : r.disputes) disputes.push_back({{"challenger", id}, {"outcome", outcome}});
    j["disputes"] = disputes;
    json chs = json::array();
    for (const auto& c : r.challengers) {
      json cj{{"id", c.id},
              {"corrupt", c.corrupt},
              {"counted", c.counted},
              {"probes_sent", c.probes_sent},
              {"latency_ns", c.latency_ns},
              {"clock_offset_ns", c.clock_offset_ns},
              {"phase", c.phase},
              {"not_terminate", c.not_terminate},
              {"verdict", c.verdict}};
      put_opt(cj, "delta_ns", c.delta_ns);
      put_opt(cj, "implied_bps", c.implied_bps);
      chs.push_back(cj);
    }
    j["challengers"] = chs;
    if (r.ladder) {
      json rungs = json::array();
      for (const auto& g : r.ladder->rungs) {
        json gj{{"claimed_bps", g.claimed_bps}, {"terminated", g.terminated}, {"not_terminate_count", g.not_terminate_count}};
        put_opt(gj, "measured_bps", g.measured_bps);
        rungs.push_back(gj);
      }
      j["ladder"] = {{"estimate_bps", r.ladder->estimate_bps},
                     {"below_floor", r.ladder->below_floor},
                     {"reached_max", r.ladder->reached_max},
                     {"rungs", rungs}};
    }
    reps.push_back(j);
  }
  const auto& s = report.summary;
  json sj{{"runs", s.runs}, {"terminated", s.terminated}, {"challenge_bytes_mean", s.challenge_bytes_mean}};
  put_opt(sj, "measured_mean_bps", s.measured_mean_bps);
  put_opt(sj, "measured_stddev_bps", s.measured_stddev_bps);
  put_opt(sj, "guaranteed_mean_bps", s.guaranteed_mean_bps);
  put_opt(sj, "guaranteed_stddev_bps", s.guaranteed_stddev_bps);
  put_opt(sj, "estimate_mean_bps", s.estimate_mean_bps);
  put_opt(sj, "estimate_stddev_bps", s.estimate_stddev_bps);
  return {{"name", report.name},
          {"mode", report.mode},
          {"theta_claimed_bps", report.theta_claimed_bps},
          {"theta0_bps", report.theta0_bps},
          {"n", report.n},
          {"f", report.f},
          {"k", report.k},
          {"duration_ns", report.duration_ns},
          {"attack", report.attack},
          {"reference_bps", report.reference_bps},
          {"repetitions", reps},
          {"summary", sj}};
}

RunReport report_from_json(const json& j) {
  RunReport report;
  report.name = j.at("name").get<std::string>();
  report.mode = j.at("mode").get<std::string>();
  report.theta_claimed_bps = j.at("theta_claimed_bps").get<double>();
  report.theta0_bps = j.at("theta0_bps").get<double>();
  report.n = j.at("n").get<std::uint32_t>();
  report.f = j.at("f").get<std::uint32_t>();
  report.k = j.at("k").get<std::uint32_t>();
  report.duration_ns = j.at("duration_ns").get<DurationNs>();
  report.attack = j.at("attack").get<std::string>();
  report.reference_bps = j.at("reference_bps").get<double>();
  for (const auto& rj : j.at("repetitions")) {
    RepetitionRecord r;
    r.repetition = rj.at("repetition").get<std::uint32_t>();
    r.seed = rj.at("seed").get<std::uint64_t>();
    r.terminated = rj.at("terminated").get<bool>();
    if (rj.contains("output")) r.output = output_from_json(rj.at("output"));
    r.response_time_ns = get_opt<DurationNs>(rj, "response_time_ns");
    r.not_terminate_count = rj.at("not_terminate_count").get<std::uint32_t>();
    const auto& d = rj.at("drops");
    r.drops = {d.at("backhaul_queue").get<std::uint64_t>(), d.at("uplink_queue").get<std::uint64_t>(),
               d.at("loss").get<std::uint64_t>(), d.at("withheld").get<std::uint64_t>()};
    r.challenge_bytes = rj.at("challenge_bytes").get<std::uint64_t>();
    r.backhaul_bytes = rj.at("backhaul_bytes").get<std::uint64_t>();
    for (const auto& dj : rj.at("disputes")) {
      r.disputes.emplace_back(dj.at("challenger").get<ChallengerId>(), dj.at("outcome").get<std::string>());
    }
    for (const auto& cj : rj.at("challengers")) {
      ChallengerRecord c;
      c.id = cj.at("id").get<ChallengerId>();
      c.corrupt = cj.at("corrupt").get<bool>();
      c.delta_ns = get_opt<DurationNs>(cj, "delta_ns");
      c.implied_bps = get_opt<double>(cj, "implied_bps");
      c.counted = cj.at("counted").get<std::uint32_t>();
      c.probes_sent = cj.at("probes_sent").get<std::uint32_t>();
      c.latency_ns = cj.at("latency_ns").get<DurationNs>();
      c.clock_offset_ns = cj.at("clock_offset_ns").get<DurationNs>();
      c.phase = cj.at("phase").get<std::string>();
      c.not_terminate = cj.at("not_terminate").get<bool>();
      c.verdict = cj.at("verdict").get<std::string>();
      r.challengers.push_back(c);
    }
    if (rj.contains("ladder")) {
      const auto& lj = rj.at("ladder");
      LadderRecord l;
      l.estimate_bps = lj.at("estimate_bps").get<double>();
      l.below_floor = lj.at("below_floor").get<bool>();
      l.reached_max = lj.at("reached_max").get<bool>();
      for (const auto& gj : lj.at("rungs")) {
        l.rungs.push_back({gj.at("claimed_bps").get<double>(), gj.at("terminated").get<bool>(),
                           gj.at("not_terminate_count").get<std::uint32_t>(), get_opt<double>(gj, "measured_bps")});
      }
      r.ladder = l;
    }
    report.repetitions.push_back(std::move(r));
  }
  report.summarize();
  return report;
}

json bundle_json(const std::vector<RunReport>& reports) {
  json list = json::array();
  for (const auto& r : reports) list.push_back(to_json(r));
  return {{"format", kReportFormat}, {"reports", list}};
}

std::vector<RunReport> parse_bundle(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != kReportFormat) {
      throw InputError(std::string("not a report bundle (expected format ") + kReportFormat + ")");
    }
    std::vector<RunReport> out;
    for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
    return out;
  } catch (const json::exception& e) {
    throw InputError(std::string("report schema mismatch: ") + e.what());
  }
}

std::string challenger_csv(const RunReport& report) {
  std::ostringstream out;
  out << "repetition,challenger,delta_ns,measured_bps,guaranteed_bps\n";
  out << std::setprecision(12);
  for (const auto& r : report.repetitions) {
    for (const auto& c : r.challengers) {
      out << r.repetition << ',' << c.id << ',';
      if (c.delta_ns) out << *c.delta_ns;
      out << ',';
      if (r.output) out << r.output->measured_bps;
      out << ',';
      if (r.output) out << r.output->guaranteed_bps;
      out << '\n';
    }
  }
  return out.str();
}

std::string render(const std::vector<RunReport>& reports, TableFormat format) {
  const std::vector<std::string> header = {"Backhaul (Mbps)", "Challenger BW (Mbps)", "Challenge Data (MB)", "Attack",
                                           "Measured (Error%)", "Guaranteed (Mbps)"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    const auto& s = r.summary;
    std::string measured = "n/a", guaranteed = "n/a";
    const auto value = s.estimate_mean_bps ? s.estimate_mean_bps : s.measured_mean_bps;
    if (s.estimate_mean_bps) {
      // A ladder has no claimed rate to compare against; print the estimate alone.
      measured = fixed(*value / 1e6, 1);
    } else if (value) {
      const double ref = r.reference_bps;
      const double err = ref > 0 ? std::abs(ref - *value) / ref * 100 : 0;
      measured = fixed(*value / 1e6, 1) + " (" + fixed(err, 1) + "%)";
    }
    if (s.guaranteed_mean_bps && !s.estimate_mean_bps) guaranteed = fixed(*s.guaranteed_mean_bps / 1e6, 1);
    rows.push_back({fixed(r.theta_claimed_bps / 1e6, 0), fixed(r.theta0_bps / 1e6, 1),
                    fixed(s.challenge_bytes_mean / 1e6, 2), r.attack, measured, guaranteed});
  }

  std::ostringstream out;
  if (format == TableFormat::csv) {
    auto quote = [](const std::string& cell) {
      if (cell.find_first_of(",\"") == std::string::npos) return cell;
      std::string q = "\"";
      for (char c : cell) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      return q + "\"";
    };
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << quote(header[i]);
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << quote(row[i]);
      out << '\n';
    }
    return out.str();
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << cells[i];
    }
    out << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
  return out.str();
}

}  // namespace pob::harness
