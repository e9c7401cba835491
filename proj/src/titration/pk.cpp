#include "titration/pk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace titration {

void DrugParams::validate() const {
  if (!(bioavailability > 0.0) || !(distribution_volume > 0.0) || !(clearance > 0.0) ||
      !(k1 > 0.0) || !(k2 > 0.0)) {
    throw std::invalid_argument(fmt::format("drug '{}': parameters must be positive", name));
  }
  if (!(k2 > k1)) {
    throw std::invalid_argument(
        fmt::format("drug '{}': k2 ({}) must exceed k1 ({})", name, k2, k1));
  }
}

void Subject::validate() const {
  if (!(body_weight > 0.0)) {
    throw std::invalid_argument("body weight must be positive");
  }
}

namespace drugs {
DrugParams glargine100() { return {"glargine-100", 1.0, 0.1, 0.18, 0.00067, 0.0059}; }
DrugParams glargine300() { return {"glargine-300", 1.0, 0.1, 0.22, 0.00057, 0.0019}; }
DrugParams degludec() { return {"degludec", 1.0, 0.1, 0.20, 0.00068, 0.0024}; }
}  // namespace drugs

DrugParams drug_preset(std::string_view name) {
  if (name == "glargine-100") return drugs::glargine100();
  if (name == "glargine-300") return drugs::glargine300();
  if (name == "degludec") return drugs::degludec();
  throw std::invalid_argument(fmt::format("unknown drug preset '{}'", name));
}

std::map<std::string, DrugParams> load_drug_presets(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), e.message()));
  }
  std::map<std::string, DrugParams> out;
  for (const auto& [section, body] : tree) {
    DrugParams d;
    d.name = section;
    try {
      d.bioavailability = body.get<double>("F");
      d.distribution_volume = body.get<double>("Vi");
      d.clearance = body.get<double>("kcl");
      d.k1 = body.get<double>("k1");
      d.k2 = body.get<double>("k2");
    } catch (const boost::property_tree::ptree_error& e) {
      throw std::runtime_error(
          fmt::format("{}: section [{}]: {}", path.string(), section, e.what()));
    }
    try {
      d.validate();
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(fmt::format("{}: section [{}]: {}", path.string(), section, e.what()));
    }
    out.emplace(section, std::move(d));
  }
  return out;
}

double pk_gain(const DrugParams& drug, const Subject& subject) {
  return 1000.0 * drug.bioavailability * drug.k2 * drug.k1 /
         (subject.body_weight * drug.distribution_volume * drug.clearance * (drug.k2 - drug.k1));
}

double pk_kernel(const DrugParams& drug, Minutes dt) {
  const auto x = static_cast<double>(dt);
  return std::exp(-drug.k1 * x) - std::exp(-drug.k2 * x);
}

namespace {

void check_inputs(std::span<const DoseEvent> doses, Minutes t, const DrugParams& drug) {
  drug.validate();
  if (!doses.empty() && doses.back().time > t) {
    throw std::invalid_argument(
        fmt::format("dose at t={} lies after evaluation time {}", doses.back().time, t));
  }
}

}  // namespace

double plasma_insulin(std::span<const DoseEvent> doses, Minutes t, const DrugParams& drug,
                      const Subject& subject) {
  check_inputs(doses, t, drug);
  double sum = 0.0;
  for (const auto& d : doses) {
    sum += pk_kernel(drug, t - d.time) * d.units;
  }
  return pk_gain(drug, subject) * sum;
}

double plasma_insulin_truncated(std::span<const DoseEvent> doses, Minutes t,
                                const DrugParams& drug, const Subject& subject, Minutes memory) {
  check_inputs(doses, t, drug);
  double sum = 0.0;
  for (auto it = doses.rbegin(); it != doses.rend() && t - it->time <= memory; ++it) {
    sum += pk_kernel(drug, t - it->time) * it->units;
  }
  return pk_gain(drug, subject) * sum;
}

double half_life(const DrugParams& drug) {
  drug.validate();
  return 1.0 / drug.k1;
}

double time_to_peak(const DrugParams& drug, double injection_period) {
  if (!(injection_period > 0.0)) {
    throw std::invalid_argument("injection period must be positive");
  }
  drug.validate();
  const double k1 = drug.k1;
  const double k2 = drug.k2;
  const double accumulation =
      std::log((1.0 - std::exp(-k1 * injection_period)) / (1.0 - std::exp(-k2 * injection_period)));
  return (std::log(k1 / k2) - accumulation) / (k1 - k2);
}

double steady_state_avg(const DrugParams& drug, double daily_units, double injection_period,
                        const Subject& subject) {
  if (daily_units < 0.0) throw std::invalid_argument("daily units must be non-negative");
  if (!(injection_period > 0.0)) throw std::invalid_argument("injection period must be positive");
  drug.validate();
  subject.validate();
  return 1000.0 * drug.bioavailability * daily_units /
         (subject.body_weight * drug.distribution_volume * drug.clearance * injection_period);
}

}  // namespace titration
