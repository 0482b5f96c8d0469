// pob: run scenarios in the simulator or over UDP, and render reports.
//
// Exit codes: 0 success, 2 invalid config or report file, 3 runtime failure,
// 4 a round did not terminate. POB_LOG sets the log level (trace, debug, info,
// warn, error, off; default warn). Logs go to stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "pob/harness/config.h"
#include "pob/harness/live.h"
#include "pob/harness/report.h"

namespace {

using namespace pob;
using namespace pob::harness;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitNoTermination = 4;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

bool failed_round(const RunReport& r) {
  for (const auto& rep : r.repetitions) {
    if (rep.ladder ? rep.ladder->below_floor : !rep.terminated) return true;
  }
  return false;
}

std::string csv_path(const std::string& base, const std::string& name, std::size_t count) {
  if (count == 1) return base;
  std::filesystem::path p(base);
  return (p.parent_path() / (p.stem().string() + "_" + name + p.extension().string())).string();
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("pob");
  spdlog::set_default_logger(logger);
  const char* level = std::getenv("POB_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);

  CLI::App app{"Multichallenger proof-of-backhaul: simulate, measure, report"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::string out_path, csv, trace_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> reps;
  auto* sim = app.add_subcommand("simulate", "Run scenario files in the simulator");
  sim->add_option("--config", configs, "Scenario file (repeatable)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_path, "Report bundle to write")->required();
  sim->add_option("--csv", csv, "Per-challenger CSV to write");
  sim->add_option("--seed", seed, "Override run.seed");
  sim->add_option("--reps", reps, "Override run.repetitions")->check(CLI::PositiveNumber);
  sim->add_option("--trace", trace_path, "Write the event trace of every repetition here");

  std::string role, config_path, listen, peer;
  auto* measure = app.add_subcommand("measure", "Run one live role over UDP (or all of them with --role local)");
  measure->add_option("--role", role, "challenger, prover, verifier or local")
      ->required()
      ->check(CLI::IsMember({"challenger", "prover", "verifier", "local"}));
  measure->add_option("--config", config_path, "Scenario file with a live section")->required()->check(CLI::ExistingFile);
  measure->add_option("--listen", listen, "host:port to bind");
  measure->add_option("--peer", peer, "Prover host:port (challenger role)");
  measure->add_option("--out", out_path, "Report bundle to write");

  std::string render_path, format = "table";
  auto* report = app.add_subcommand("report", "Print a report bundle as a table");
  report->add_option("--render", render_path, "Report bundle")->required();
  report->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) {
      std::vector<RunReport> reports;
      std::string traces;
      for (const auto& path : configs) {
        auto cfg = load_config(path);
        if (seed) cfg.run.seed = *seed;
        if (reps) cfg.run.repetitions = *reps;
        if (!trace_path.empty()) cfg.run.trace = true;
        auto result = simulate(cfg);
        for (std::size_t r = 0; r < result.traces.size(); ++r) {
          traces += "# " + cfg.name + " repetition " + std::to_string(r) + "\n" + result.traces[r];
        }
        reports.push_back(std::move(result.report));
      }
      write_file(out_path, bundle_json(reports).dump(2) + "\n");
      if (!csv.empty()) {
        for (const auto& r : reports) write_file(csv_path(csv, r.name, reports.size()), challenger_csv(r));
      }
      if (!trace_path.empty()) write_file(trace_path, traces);
      std::cout << render(reports, TableFormat::table);
      for (const auto& r : reports) {
        if (failed_round(r)) return kExitNoTermination;
      }
      return 0;
    }
    if (*measure) {
      const auto cfg = load_config(config_path);
      RunReport r;
      if (role == "local") {
        r = live::run_local(cfg);
      } else {
        live::RoleOptions opts;
        opts.role = live::role_from_string(role);
        opts.listen = listen;
        opts.peer = peer;
        r = live::run_role(cfg, opts);
      }
      if (!out_path.empty()) write_file(out_path, bundle_json({r}).dump(2) + "\n");
      if (role == "verifier" || role == "local") std::cout << render({r}, TableFormat::table);
      return failed_round(r) ? kExitNoTermination : 0;
    }
    std::ifstream in(render_path);
    if (!in) throw ConfigError("--render", "cannot open " + render_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("report is not valid JSON: ") + e.what());
    }
    std::cout << render(parse_bundle(j), format == "csv" ? TableFormat::csv : TableFormat::table);
    return 0;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
