#pragma once

// Run reports: what `simulate` and `measure` write and `report --render` reads.
//
// A report file is a bundle {"format": "pob-report/1", "reports": [RunReport...]}.
// Bandwidths are bits/s, times are ns. Per-repetition records carry the
// verifier output (absent when the round did not terminate), per-challenger
// Δ_i, the bandwidth that challenger's Δ_i alone implies, the probes the
// verifier counted for it, and drop counters. The summary's stddev fields are
// present only with two or more terminated repetitions.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pob/harness/config.h"

namespace pob::harness {

inline constexpr const char* kReportFormat = "pob-report/1";

struct ChallengerRecord {
  ChallengerId id = 0;
  bool corrupt = false;
  std::optional<DurationNs> delta_ns;
  std::optional<double> implied_bps;  // cnt * b * 8 / Δ_i
  std::uint32_t counted = 0;
  std::uint32_t probes_sent = 0;
  DurationNs latency_ns = 0;
  DurationNs clock_offset_ns = 0;
  std::string phase;
  bool not_terminate = false;
  std::string verdict;
  bool operator==(const ChallengerRecord&) const = default;
};

struct RungRecord {
  double claimed_bps = 0;
  bool terminated = false;
  std::uint32_t not_terminate_count = 0;
  std::optional<double> measured_bps;
  bool operator==(const RungRecord&) const = default;
};

struct LadderRecord {
  double estimate_bps = 0;
  bool below_floor = false;
  bool reached_max = false;
  std::vector<RungRecord> rungs;
  bool operator==(const LadderRecord&) const = default;
};

struct RepetitionRecord {
  std::uint32_t repetition = 0;
  std::uint64_t seed = 0;
  bool terminated = false;
  std::optional<roles::PoBOutput> output;
  std::optional<DurationNs> response_time_ns;  // since t0
  std::uint32_t not_terminate_count = 0;
  netsim::DropStats drops;
  std::uint64_t challenge_bytes = 0;
  std::uint64_t backhaul_bytes = 0;
  std::vector<std::pair<ChallengerId, std::string>> disputes;
  std::vector<ChallengerRecord> challengers;
  std::optional<LadderRecord> ladder;
  bool operator==(const RepetitionRecord&) const = default;
};

struct Summary {
  std::uint32_t runs = 0;
  std::uint32_t terminated = 0;
  std::optional<double> measured_mean_bps;
  std::optional<double> measured_stddev_bps;
  std::optional<double> guaranteed_mean_bps;
  std::optional<double> guaranteed_stddev_bps;
  std::optional<double> estimate_mean_bps;  // ladder runs only
  std::optional<double> estimate_stddev_bps;
  double challenge_bytes_mean = 0;
  bool operator==(const Summary&) const = default;
};

struct RunReport {
  std::string name;
  std::string mode = "simulate";  // or "live"
  double theta_claimed_bps = 0;
  double theta0_bps = 0;
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t k = 0;
  DurationNs duration_ns = 0;
  std::string attack;  // "-" when nobody misbehaves
  /// What an accurate measured value should be under this attack: theta_claimed,
  /// scaled by (n - f) / (n - f - r) when r keyed-in or rushing challengers
  /// feed a colluding prover.
  double reference_bps = 0;
  std::vector<RepetitionRecord> repetitions;
  Summary summary;
  bool operator==(const RunReport&) const = default;

  /// Recomputes `summary` from `repetitions`.
  void summarize();
};

/// Mean and sample stddev; stddev is absent below two values.
std::pair<std::optional<double>, std::optional<double>> mean_stddev(const std::vector<double>& values);

/// Attack label for reports, e.g. "Rushing", "Withholding", "-".
std::string attack_label(const adversary::AttackConfig& attack);
double reference_bandwidth(const schedule::ChallengeParams& params, const adversary::AttackConfig& attack);

RepetitionRecord record_from_sim(const netsim::SimResult& sim, std::uint32_t repetition, std::uint64_t seed);

struct SimulateOutput {
  RunReport report;
  std::vector<std::string> traces;  // one trace_text() per repetition when tracing is on
};

/// Runs every repetition of `config`, with repetition r seeded by
/// derive_seed(config.run.seed, r). Ladder scenarios run the whole ladder per repetition.
SimulateOutput simulate(const ScenarioConfig& config);

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
nlohmann::json bundle_json(const std::vector<RunReport>& reports);
/// Throws InputError on a schema mismatch.
std::vector<RunReport> parse_bundle(const nlohmann::json& j);

/// Header "repetition,challenger,delta_ns,measured_bps,guaranteed_bps"; empty
/// cells where a challenger has no Δ_i or the round no output.
std::string challenger_csv(const RunReport& report);

enum class TableFormat { table, csv };
/// One row per report with the columns Backhaul, Challenger BW, Challenge Data,
/// Attack, Measured (Error%), Guaranteed.
std::string render(const std::vector<RunReport>& reports, TableFormat format);

}  // namespace pob::harness
