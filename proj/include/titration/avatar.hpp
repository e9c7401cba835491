#pragma once

// Synthetic T2D virtual patients.
//
// The plant is deliberately richer than the controller's linear model:
// fasting glucose responds to insulin through a saturating effect,
//
//   FBG(day) = max(floor, B0 - S * I / (1 + I / I50) + eps_day),
//
// with I computed from avatar-specific perturbed PK constants and eps_day an
// i.i.d. daily perturbation. Intraday CGM traces add meal excursions on top of
// the day's fasting level.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "titration/pk.hpp"

namespace titration {

inline constexpr int kSamplesPerDay = static_cast<int>(kMinutesPerDay / kCgmStep);
inline constexpr Minutes kFastingMinute = 7 * 60;  // 07:00, also the injection time

// Breakfast, lunch, dinner, snack.
inline constexpr std::array<Minutes, 4> kMealMinutes{7 * 60 + 30, 12 * 60 + 30, 18 * 60 + 30,
                                                     15 * 60 + 30};

struct MealResponse {
  double mg_per_gram = 1.0;    // peak excursion per gram of carbohydrate
  double rise_minutes = 30.0;
  double decay_minutes = 90.0;

  friend bool operator==(const MealResponse&, const MealResponse&) = default;
};

struct Avatar {
  std::uint64_t id = 0;
  double body_weight = 90.0;      // kg
  double baseline_fbg = 169.0;    // B0, mg/dL at zero insulin
  double insulin_effect = 5.0;    // S, mg/dL per mU/L
  double saturation = 40.0;       // I50, mU/L
  double glucose_floor = 40.0;    // mg/dL
  double fasting_sd = 20.0;       // mg/dL
  double daily_carbs = 200.0;     // g
  std::array<double, 4> meal_ratios{0.3, 0.3, 0.3, 0.1};
  MealResponse meal;
  // Multipliers on the nominal drug's k1, k2, kcl.
  double pk_scale_k1 = 1.0;
  double pk_scale_k2 = 1.0;
  double pk_scale_kcl = 1.0;
  double smbg_log_sd = 0.05;
  double cgm_noise_sd = 2.0;      // mg/dL
  std::uint64_t seed = 0;

  void validate() const;
  Subject subject() const { return {body_weight}; }
  // Nominal drug with this avatar's PK perturbation applied.
  DrugParams perceived_drug(const DrugParams& nominal) const;

  friend bool operator==(const Avatar&, const Avatar&) = default;
};

struct GlucoseTrace {
  Minutes start = 0;
  std::array<double, kSamplesPerDay> samples{};
};

struct PopulationTargets {
  std::size_t n = 427;
  double hba1c_mean = 8.3;
  double hba1c_sd = 1.0;
  double fbg_mean = 169.0;
  double fbg_sd = 49.0;

  void validate() const;
};

// Knobs of the synthetic population beyond the matched baseline statistics.
struct PopulationModel {
  double body_weight_mean = 90.0;
  double body_weight_sd = 15.0;
  double effect_median = 5.5;        // S
  double effect_log_sd = 0.45;
  double saturation = 40.0;          // I50
  double fasting_sd = 20.0;
  double carbs_median = 200.0;
  double carbs_log_sd = 0.2;
  double hba1c_fbg_correlation = 0.6;
  double min_mean_excursion = 15.0;  // mg/dL
  double pk_log_sd = 0.1;
  double smbg_log_sd = 0.05;
  double cgm_noise_sd = 2.0;
};

std::vector<Avatar> generate_population(const PopulationTargets& targets,
                                        std::uint64_t master_seed,
                                        const PopulationModel& model = {});

// Fasting glucose on `day` (at 07:00) given doses injected up to then.
double true_fbg(const Avatar& avatar, std::span<const DoseEvent> doses, int day,
                const DrugParams& drug);

// Same without the daily perturbation: the avatar's noise-free dose response.
double steady_fbg(const Avatar& avatar, double plasma_insulin);

// Daily perturbation eps_day.
double fasting_perturbation(const Avatar& avatar, int day);

GlucoseTrace cgm_day(const Avatar& avatar, double fasting_level, int day);

double measure_smbg(const Avatar& avatar, double true_value, int day);

// Daily-mean excursion per (mg/dL per gram) of meal response; used to calibrate
// meal_response against an HbA1c target.
double mean_excursion_per_unit_response(const Avatar& avatar);

// One avatar per line, JSON objects with every field.
void save_population(const std::vector<Avatar>& population, const std::filesystem::path& path);
std::vector<Avatar> load_population(const std::filesystem::path& path);

}  // namespace titration
