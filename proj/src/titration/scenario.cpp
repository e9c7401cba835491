#include "titration/scenario.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "titration/random.hpp"

namespace titration {

std::string_view to_string(PolicyKind kind) { return kind == PolicyKind::Soc ? "soc" : "rhc"; }

PolicyKind parse_policy(std::string_view text) {
  if (text == "soc" || text == "SoC") return PolicyKind::Soc;
  if (text == "rhc" || text == "RHC") return PolicyKind::Rhc;
  throw std::invalid_argument(fmt::format("unknown policy '{}'", text));
}

void ScenarioSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("scenario needs a name");
  if (fbg_window < 1) throw std::invalid_argument("FBG window must be >= 1");
  if (interval_pattern.empty() ||
      std::any_of(interval_pattern.begin(), interval_pattern.end(), [](int d) { return d < 1; })) {
    throw std::invalid_argument("titration intervals must be >= 1 day");
  }
  if (duration_weeks < 2) throw std::invalid_argument("duration must cover one 14-day window");
  if (miss_probability < 0.0 || miss_probability > 1.0) {
    throw std::invalid_argument("miss probability must lie in [0, 1]");
  }
}

ScenarioSpec ScenarioSpec::preset(std::string_view name, int weeks) {
  ScenarioSpec s;
  s.name = std::string(name);
  s.duration_weeks = weeks;
  if (name == "SoC-3") {
    s.policy = PolicyKind::Soc;
    s.fbg_window = 3;
  } else if (name == "SoC-1") {
    s.policy = PolicyKind::Soc;
    s.fbg_window = 1;
  } else if (name == "RHC-3") {
    s.policy = PolicyKind::Rhc;
    s.fbg_window = 3;
  } else if (name == "RHC-1") {
    s.policy = PolicyKind::Rhc;
    s.fbg_window = 1;
  } else if (name == "RHC-1-acc") {
    s.policy = PolicyKind::Rhc;
    s.fbg_window = 1;
    s.interval_pattern = {1};
  } else {
    throw std::invalid_argument(fmt::format("unknown scenario preset '{}'", name));
  }
  return s;
}

std::vector<ScenarioSpec> canonical_scenarios(int weeks) {
  std::vector<ScenarioSpec> out;
  for (const auto* name : {"SoC-3", "SoC-1", "RHC-3", "RHC-1", "RHC-1-acc"}) {
    out.push_back(ScenarioSpec::preset(name, weeks));
  }
  return out;
}

std::vector<int> titration_days(const ScenarioSpec& spec) {
  std::vector<int> out;
  std::size_t k = 0;
  for (int day = 0; day < spec.days(); day += spec.interval_pattern[k++ % spec.interval_pattern.size()]) {
    out.push_back(day);
  }
  return out;
}

std::vector<bool> measurement_schedule(const ScenarioSpec& spec) {
  std::vector<bool> measured(static_cast<std::size_t>(spec.days()), false);
  for (const int day : titration_days(spec)) {
    for (int d = std::max(0, day - spec.fbg_window + 1); d <= day; ++d) {
      measured[static_cast<std::size_t>(d)] = true;
    }
  }
  return measured;
}

namespace {

std::unique_ptr<TitrationPolicy> make_policy(const ScenarioSpec& spec, const Avatar& avatar,
                                             const RunSettings& settings) {
  if (spec.policy == PolicyKind::Soc) return std::make_unique<SocPolicy>(settings.config);
  return std::make_unique<RhcPolicy>(settings.config, settings.prior, settings.drug,
                                     avatar.subject());
}

bool reading_missed(const Avatar& avatar, int day, double probability) {
  if (probability <= 0.0) return false;
  auto rng = make_rng(avatar.seed, Stream::Adherence, static_cast<std::uint64_t>(day));
  return std::bernoulli_distribution(probability)(rng);
}

void run_avatar(const ScenarioSpec& spec, const Avatar& base, const RunSettings& settings,
                std::uint64_t master_seed, AvatarRun& run) {
  Avatar avatar = base;
  avatar.seed = splitmix64(base.seed ^ master_seed);

  const int days = spec.days();
  const auto schedule = measurement_schedule(spec);
  std::vector<bool> titrate(static_cast<std::size_t>(days), false);
  for (const int d : titration_days(spec)) titrate[static_cast<std::size_t>(d)] = true;

  auto policy = make_policy(spec, avatar, settings);
  ObservationLog log;
  std::vector<DoseEvent> doses;
  std::vector<double> fbg_series;
  std::vector<double> dose_series;
  std::deque<GlucoseTrace> window;
  double dose = settings.start_dose;

  run.days.reserve(static_cast<std::size_t>(days));
  for (int day = 0; day < days; ++day) {
    const Minutes now = day * kMinutesPerDay + kFastingMinute;
    DayRecord rec;
    rec.day = day;
    rec.true_fbg = true_fbg(avatar, doses, day, settings.drug);

    if (schedule[static_cast<std::size_t>(day)] &&
        !reading_missed(avatar, day, spec.miss_probability)) {
      rec.smbg = measure_smbg(avatar, rec.true_fbg, day);
      log.add_reading(now, *rec.smbg);
    }

    if (titrate[static_cast<std::size_t>(day)]) {
      std::vector<double> readings;
      for (auto it = run.days.rbegin();
           it != run.days.rend() && it->day > day - spec.fbg_window; ++it) {
        if (it->smbg) readings.insert(readings.begin(), *it->smbg);
      }
      if (rec.smbg) readings.push_back(*rec.smbg);
      const TitrationContext ctx{now, dose, &log, readings};
      const auto decision = policy->decide(ctx);
      if (decision.applied) {
        rec.titrated = true;
        rec.delta_u = decision.delta_u;
        dose = std::max(0.0, dose + decision.delta_u);
        rec.estimate = decision.estimate;
      }
    }
    if (!(dose >= 0.0)) throw std::logic_error("dose became negative");

    rec.dose = dose;
    doses.push_back({now, dose});
    log.add_dose({now, dose});

    auto trace = cgm_day(avatar, rec.true_fbg, day);
    const auto daily = compute_window(std::span(&trace, 1), std::span(&rec.true_fbg, 1),
                                      std::span(&rec.dose, 1), day);
    rec.tir = daily.tir;
    rec.tbr = daily.tbr;
    rec.mean_cgm = daily.mean_cgm;

    fbg_series.push_back(rec.true_fbg);
    dose_series.push_back(rec.dose);
    window.push_back(trace);
    if (settings.keep_traces) run.traces.push_back(trace);
    if (static_cast<int>(window.size()) == kWindowDays) {
      const std::vector<GlucoseTrace> buf(window.begin(), window.end());
      const auto start = static_cast<std::size_t>(day + 1 - kWindowDays);
      run.metrics.windows.push_back(compute_window(
          buf, std::span(fbg_series).subspan(start, kWindowDays),
          std::span(dose_series).subspan(start, kWindowDays), static_cast<int>(start)));
      window.clear();
    }
    run.days.push_back(std::move(rec));
  }
}

AvatarRun guarded_run(const ScenarioSpec& spec, const Avatar& avatar, const RunSettings& settings,
                      std::uint64_t master_seed) {
  AvatarRun run;
  run.avatar_id = avatar.id;
  try {
    run_avatar(spec, avatar, settings, master_seed, run);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

}  // namespace

AvatarRun simulate_avatar(const ScenarioSpec& spec, const Avatar& avatar,
                          const RunSettings& settings, std::uint64_t master_seed) {
  spec.validate();
  return guarded_run(spec, avatar, settings, master_seed);
}

ScenarioResult run_scenario(const ScenarioSpec& spec, const std::vector<Avatar>& population,
                            const RunSettings& settings, std::uint64_t master_seed) {
  spec.validate();
  settings.config.validate();
  ScenarioResult result{spec, master_seed, std::vector<AvatarRun>(population.size())};
  const auto n = static_cast<std::int64_t>(population.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    result.runs[k] = guarded_run(spec, population[k], settings, master_seed);
  }
  return result;
}

ScenarioResult run_scenario_serial(const ScenarioSpec& spec,
                                   const std::vector<Avatar>& population,
                                   const RunSettings& settings, std::uint64_t master_seed) {
  spec.validate();
  settings.config.validate();
  ScenarioResult result{spec, master_seed, {}};
  result.runs.reserve(population.size());
  for (const auto& avatar : population) {
    result.runs.push_back(guarded_run(spec, avatar, settings, master_seed));
  }
  return result;
}

}  // namespace titration
