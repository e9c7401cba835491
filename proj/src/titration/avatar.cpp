#include "titration/avatar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "titration/random.hpp"

namespace titration {

void Avatar::validate() const {
  if (!(glucose_floor > 0.0) || !(baseline_fbg > glucose_floor)) {
    throw std::invalid_argument(fmt::format("avatar {}: need B0 > floor > 0", id));
  }
  if (!(insulin_effect > 0.0) || !(saturation > 0.0) || !(fasting_sd >= 0.0)) {
    throw std::invalid_argument(fmt::format("avatar {}: S, I50 must be positive", id));
  }
  if (!(body_weight > 0.0) || !(daily_carbs >= 0.0)) {
    throw std::invalid_argument(fmt::format("avatar {}: invalid weight or carbs", id));
  }
  const double ratio_sum = std::accumulate(meal_ratios.begin(), meal_ratios.end(), 0.0);
  if (std::abs(ratio_sum - 1.0) > 1e-9) {
    throw std::invalid_argument(fmt::format("avatar {}: meal ratios sum to {}", id, ratio_sum));
  }
  if (!(meal.rise_minutes > 0.0) || !(meal.decay_minutes > meal.rise_minutes) ||
      !(meal.mg_per_gram >= 0.0)) {
    throw std::invalid_argument(fmt::format("avatar {}: invalid meal response", id));
  }
}

DrugParams Avatar::perceived_drug(const DrugParams& nominal) const {
  DrugParams d = nominal;
  d.k1 *= pk_scale_k1;
  d.k2 *= pk_scale_k2;
  d.clearance *= pk_scale_kcl;
  return d;
}

void PopulationTargets::validate() const {
  if (n == 0) throw std::invalid_argument("population size must be at least 1");
  if (hba1c_sd < 0.0 || fbg_sd < 0.0) throw std::invalid_argument("negative target sd");
  if (!(fbg_mean > 0.0)) throw std::invalid_argument("target FBG mean must be positive");
}

namespace {

// Unit-peak rise-and-decay kernel.
double meal_kernel(const MealResponse& m, double dt) {
  if (dt < 0.0) return 0.0;
  const double tr = m.rise_minutes;
  const double td = m.decay_minutes;
  const double t_peak = std::log(td / tr) * tr * td / (td - tr);
  const double peak = std::exp(-t_peak / td) - std::exp(-t_peak / tr);
  return (std::exp(-dt / td) - std::exp(-dt / tr)) / peak;
}

// Rescales values so their sample mean and sd equal the targets exactly.
void match_moments(std::vector<double>& v, double mean, double sd) {
  if (v.size() < 2) {
    std::fill(v.begin(), v.end(), mean);
    return;
  }
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double s = std::sqrt(ss / (n - 1.0));
  for (double& x : v) x = mean + (s > 0.0 ? (x - m) / s * sd : 0.0);
}

double lognormal_from_moments(std::mt19937_64& rng, double mean, double sd) {
  const double var_log = std::log(1.0 + (sd * sd) / (mean * mean));
  std::normal_distribution<double> z(std::log(mean) - 0.5 * var_log, std::sqrt(var_log));
  return std::exp(z(rng));
}

}  // namespace

double mean_excursion_per_unit_response(const Avatar& avatar) {
  double total = 0.0;
  for (int i = 0; i < kSamplesPerDay; ++i) {
    const double minute = static_cast<double>(i * kCgmStep);
    for (std::size_t m = 0; m < kMealMinutes.size(); ++m) {
      total += avatar.daily_carbs * avatar.meal_ratios[m] *
               meal_kernel(avatar.meal, minute - static_cast<double>(kMealMinutes[m]));
    }
  }
  return total / kSamplesPerDay;
}

std::vector<Avatar> generate_population(const PopulationTargets& targets,
                                        std::uint64_t master_seed,
                                        const PopulationModel& model) {
  targets.validate();
  const std::size_t n = targets.n;
  std::vector<Avatar> pop(n);
  std::vector<double> fbg_draw(n);
  std::vector<double> z_fbg(n);
  std::vector<double> z_a1c(n);

  const double fbg_var_log = std::log(1.0 + std::pow(targets.fbg_sd / targets.fbg_mean, 2));
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = pop[i];
    a.id = i;
    a.seed = derive_seed(master_seed, Stream::Avatar, i);
    auto rng = std::mt19937_64(a.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    a.body_weight = lognormal_from_moments(rng, model.body_weight_mean, model.body_weight_sd);
    z_fbg[i] = unit(rng);
    z_a1c[i] = model.hba1c_fbg_correlation * z_fbg[i] +
               std::sqrt(1.0 - model.hba1c_fbg_correlation * model.hba1c_fbg_correlation) * unit(rng);
    fbg_draw[i] = std::exp(std::log(targets.fbg_mean) - 0.5 * fbg_var_log +
                           std::sqrt(fbg_var_log) * z_fbg[i]);
    a.insulin_effect = model.effect_median * std::exp(model.effect_log_sd * unit(rng));
    a.saturation = model.saturation;
    a.fasting_sd = model.fasting_sd;
    a.daily_carbs = model.carbs_median * std::exp(model.carbs_log_sd * unit(rng));
    a.meal.rise_minutes = 30.0 * std::exp(0.1 * unit(rng));
    a.meal.decay_minutes = 100.0 * std::exp(0.15 * unit(rng));
    a.pk_scale_k1 = std::clamp(std::exp(model.pk_log_sd * unit(rng)), 0.7, 1.4);
    a.pk_scale_k2 = std::clamp(std::exp(model.pk_log_sd * unit(rng)), 0.7, 1.4);
    a.pk_scale_kcl = std::clamp(std::exp(model.pk_log_sd * unit(rng)), 0.7, 1.4);
    a.smbg_log_sd = model.smbg_log_sd;
    a.cgm_noise_sd = model.cgm_noise_sd;
  }

  match_moments(fbg_draw, targets.fbg_mean, targets.fbg_sd);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = pop[i];
    a.baseline_fbg = std::max(fbg_draw[i], a.glucose_floor + 20.0);
    // The target dose response must be reachable: the maximal effect S * I50
    // exceeds the drop to 90 mg/dL by half again.
    a.insulin_effect = std::max(a.insulin_effect, 1.5 * (a.baseline_fbg - 90.0) / a.saturation);

    // Meal response chosen so the baseline GMI equals the avatar's HbA1c draw.
    const double hba1c = targets.hba1c_mean + targets.hba1c_sd * z_a1c[i];
    const double mean_cgm = (hba1c - 3.31) / 0.02392;
    const double excursion = std::max(mean_cgm - a.baseline_fbg, model.min_mean_excursion);
    a.meal.mg_per_gram = excursion / mean_excursion_per_unit_response(a);
    a.validate();
  }
  return pop;
}

double fasting_perturbation(const Avatar& avatar, int day) {
  if (avatar.fasting_sd == 0.0) return 0.0;
  auto rng = make_rng(avatar.seed, Stream::Fasting, static_cast<std::uint64_t>(day));
  return std::normal_distribution<double>(0.0, avatar.fasting_sd)(rng);
}

double steady_fbg(const Avatar& avatar, double insulin) {
  const double effect = avatar.insulin_effect * insulin / (1.0 + insulin / avatar.saturation);
  return std::max(avatar.glucose_floor, avatar.baseline_fbg - effect);
}

double true_fbg(const Avatar& avatar, std::span<const DoseEvent> doses, int day,
                const DrugParams& drug) {
  if (day < 0) throw std::invalid_argument("day must be non-negative");
  const Minutes t = day * kMinutesPerDay + kFastingMinute;
  const auto end = std::upper_bound(doses.begin(), doses.end(), t,
                                    [](Minutes v, const DoseEvent& d) { return v < d.time; });
  const auto visible = doses.first(static_cast<std::size_t>(end - doses.begin()));
  const double insulin =
      plasma_insulin_truncated(visible, t, avatar.perceived_drug(drug), avatar.subject());
  const double effect = avatar.insulin_effect * insulin / (1.0 + insulin / avatar.saturation);
  return std::max(avatar.glucose_floor,
                  avatar.baseline_fbg - effect + fasting_perturbation(avatar, day));
}

GlucoseTrace cgm_day(const Avatar& avatar, double fasting_level, int day) {
  if (!(fasting_level > 0.0)) throw std::invalid_argument("fasting level must be positive");
  GlucoseTrace trace;
  trace.start = day * kMinutesPerDay;
  auto rng = make_rng(avatar.seed, Stream::Cgm, static_cast<std::uint64_t>(day));
  std::normal_distribution<double> noise(0.0, 1.0);
  const double lowest = 0.9 * avatar.glucose_floor;
  for (int i = 0; i < kSamplesPerDay; ++i) {
    const double minute = static_cast<double>(i * kCgmStep);
    double g = fasting_level;
    for (std::size_t m = 0; m < kMealMinutes.size(); ++m) {
      const double amplitude = avatar.daily_carbs * avatar.meal_ratios[m] * avatar.meal.mg_per_gram;
      g += amplitude * meal_kernel(avatar.meal, minute - static_cast<double>(kMealMinutes[m]));
    }
    // Draw unconditionally so the noise sequence does not depend on sd == 0.
    g += avatar.cgm_noise_sd * noise(rng);
    trace.samples[static_cast<std::size_t>(i)] = std::max(g, lowest);
  }
  return trace;
}

double measure_smbg(const Avatar& avatar, double true_value, int day) {
  if (!(true_value > 0.0)) throw std::invalid_argument("glucose must be positive");
  auto rng = make_rng(avatar.seed, Stream::Smbg, static_cast<std::uint64_t>(day));
  return true_value * std::exp(avatar.smbg_log_sd * std::normal_distribution<double>(0.0, 1.0)(rng));
}

namespace {

nlohmann::ordered_json to_json(const Avatar& a) {
  return {
      {"id", a.id},
      {"body_weight", a.body_weight},
      {"baseline_fbg", a.baseline_fbg},
      {"insulin_effect", a.insulin_effect},
      {"saturation", a.saturation},
      {"glucose_floor", a.glucose_floor},
      {"fasting_sd", a.fasting_sd},
      {"daily_carbs", a.daily_carbs},
      {"meal_ratios", a.meal_ratios},
      {"meal_mg_per_gram", a.meal.mg_per_gram},
      {"meal_rise_minutes", a.meal.rise_minutes},
      {"meal_decay_minutes", a.meal.decay_minutes},
      {"pk_scale_k1", a.pk_scale_k1},
      {"pk_scale_k2", a.pk_scale_k2},
      {"pk_scale_kcl", a.pk_scale_kcl},
      {"smbg_log_sd", a.smbg_log_sd},
      {"cgm_noise_sd", a.cgm_noise_sd},
      {"seed", a.seed},
  };
}

Avatar from_json(const nlohmann::json& j) {
  Avatar a;
  a.id = j.at("id").get<std::uint64_t>();
  a.body_weight = j.at("body_weight").get<double>();
  a.baseline_fbg = j.at("baseline_fbg").get<double>();
  a.insulin_effect = j.at("insulin_effect").get<double>();
  a.saturation = j.at("saturation").get<double>();
  a.glucose_floor = j.at("glucose_floor").get<double>();
  a.fasting_sd = j.at("fasting_sd").get<double>();
  a.daily_carbs = j.at("daily_carbs").get<double>();
  a.meal_ratios = j.at("meal_ratios").get<std::array<double, 4>>();
  a.meal.mg_per_gram = j.at("meal_mg_per_gram").get<double>();
  a.meal.rise_minutes = j.at("meal_rise_minutes").get<double>();
  a.meal.decay_minutes = j.at("meal_decay_minutes").get<double>();
  a.pk_scale_k1 = j.at("pk_scale_k1").get<double>();
  a.pk_scale_k2 = j.at("pk_scale_k2").get<double>();
  a.pk_scale_kcl = j.at("pk_scale_kcl").get<double>();
  a.smbg_log_sd = j.at("smbg_log_sd").get<double>();
  a.cgm_noise_sd = j.at("cgm_noise_sd").get<double>();
  a.seed = j.at("seed").get<std::uint64_t>();
  a.validate();
  return a;
}

}  // namespace

void save_population(const std::vector<Avatar>& population, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("{}: cannot open for writing", path.string()));
  for (const auto& a : population) out << to_json(a).dump() << '\n';
  if (!out) throw std::runtime_error(fmt::format("{}: write failed", path.string()));
}

std::vector<Avatar> load_population(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("{}: cannot open", path.string()));
  std::vector<Avatar> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return out;
}

}  // namespace titration
