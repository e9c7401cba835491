#pragma once

// Titration experiments over a virtual population.
//
// Each avatar is simulated day by day:
//   fasting glucose -> SMBG (if scheduled) -> titration (if due) -> injection -> CGM day.
// Avatars are independent; run_scenario distributes them over OpenMP threads
// and run_scenario_serial is the single-threaded reference. Both produce
// identical results for identical inputs.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "titration/avatar.hpp"
#include "titration/controllers.hpp"
#include "titration/metrics.hpp"

namespace titration {

enum class PolicyKind { Soc, Rhc };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy(std::string_view text);

struct ScenarioSpec {
  std::string name;
  PolicyKind policy = PolicyKind::Soc;
  int fbg_window = 3;
  // Gaps between successive titration days, cycled; {3, 4} is twice weekly.
  std::vector<int> interval_pattern{3, 4};
  int duration_weeks = 52;
  // Per-day probability that a scheduled SMBG reading is skipped.
  double miss_probability = 0.0;

  void validate() const;
  int days() const { return duration_weeks * 7; }

  // "SoC-3", "SoC-1", "RHC-3", "RHC-1" or "RHC-1-acc".
  static ScenarioSpec preset(std::string_view name, int weeks = 52);
};

std::vector<ScenarioSpec> canonical_scenarios(int weeks = 52);

std::vector<int> titration_days(const ScenarioSpec& spec);
// Days on which an SMBG reading is scheduled: each titration day and the
// fbg_window - 1 days before it.
std::vector<bool> measurement_schedule(const ScenarioSpec& spec);

struct RunSettings {
  TitrationConfig config;
  PriorSpec prior;
  DrugParams drug = drugs::degludec();
  double start_dose = 0.0;
  bool keep_traces = false;
};

struct DayRecord {
  int day = 0;
  double dose = 0.0;       // injected this day
  double true_fbg = 0.0;
  std::optional<double> smbg;
  bool titrated = false;
  double delta_u = 0.0;
  double tir = 0.0;
  double tbr = 0.0;
  double mean_cgm = 0.0;
  std::optional<ModelParams> estimate;

  friend bool operator==(const DayRecord&, const DayRecord&) = default;
};

struct AvatarRun {
  std::uint64_t avatar_id = 0;
  std::vector<DayRecord> days;
  MetricsReport metrics;
  std::vector<GlucoseTrace> traces;  // only when keep_traces
  std::string error;                 // non-empty if the run aborted

  bool ok() const { return error.empty(); }
};

struct ScenarioResult {
  ScenarioSpec spec;
  std::uint64_t master_seed = 0;
  std::vector<AvatarRun> runs;  // in population order
};

AvatarRun simulate_avatar(const ScenarioSpec& spec, const Avatar& avatar,
                          const RunSettings& settings, std::uint64_t master_seed);

ScenarioResult run_scenario(const ScenarioSpec& spec, const std::vector<Avatar>& population,
                            const RunSettings& settings, std::uint64_t master_seed);

ScenarioResult run_scenario_serial(const ScenarioSpec& spec,
                                   const std::vector<Avatar>& population,
                                   const RunSettings& settings, std::uint64_t master_seed);

}  // namespace titration
