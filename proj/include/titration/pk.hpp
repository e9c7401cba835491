#pragma once

// Closed-form basal insulin pharmacokinetics.
//
// Plasma insulin after a history of subcutaneous injections is a superposition
// of biexponential absorption/clearance kernels:
//
//   I(t) = 1000 F k1 k2 / (BW Vi kcl (k2 - k1)) * sum_k (e^{-k1 (t-t_k)} - e^{-k2 (t-t_k)}) u_k
//
// with u_k in units (U) and I in mU/L.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

namespace titration {

using Minutes = std::int64_t;

inline constexpr Minutes kMinutesPerDay = 1440;
inline constexpr Minutes kCgmStep = 5;
// Doses older than this contribute less than e^{-k1 * 20160} of their initial
// kernel weight (~1e-6 for Degludec) and are dropped by the truncated evaluator.
inline constexpr Minutes kDoseMemory = 14 * kMinutesPerDay;

struct DrugParams {
  std::string name;
  double bioavailability = 1.0;      // F, unitless
  double distribution_volume = 0.1;  // Vi, L/kg
  double clearance = 0.2;            // kcl, 1/min
  double k1 = 0.0;                   // 1/min
  double k2 = 0.0;                   // 1/min

  // Throws std::invalid_argument unless all rates/volumes are positive and k2 > k1.
  void validate() const;
};

struct DoseEvent {
  Minutes time = 0;
  double units = 0.0;

  friend bool operator==(const DoseEvent&, const DoseEvent&) = default;
};

struct Subject {
  double body_weight = 90.0;  // kg

  void validate() const;
};

namespace drugs {
DrugParams glargine100();
DrugParams glargine300();
DrugParams degludec();
}  // namespace drugs

// Looks up a built-in preset by name ("glargine-100", "glargine-300", "degludec").
DrugParams drug_preset(std::string_view name);

// Reads an INI file with one section per formulation holding F, Vi, kcl, k1, k2.
std::map<std::string, DrugParams> load_drug_presets(const std::filesystem::path& path);

// Multiplier applied to sum_k kernel(t - t_k) * u_k.
double pk_gain(const DrugParams& drug, const Subject& subject);

// Unit-dose kernel e^{-k1 dt} - e^{-k2 dt}, dt >= 0.
double pk_kernel(const DrugParams& drug, Minutes dt);

// Exact evaluation over the full history. Doses must be time-ordered and none
// may lie after t.
double plasma_insulin(std::span<const DoseEvent> doses, Minutes t, const DrugParams& drug,
                      const Subject& subject);

// Same as plasma_insulin but ignores doses older than `memory` minutes. Cost is
// proportional to the number of doses inside the window.
double plasma_insulin_truncated(std::span<const DoseEvent> doses, Minutes t,
                                const DrugParams& drug, const Subject& subject,
                                Minutes memory = kDoseMemory);

double half_life(const DrugParams& drug);

// Time of the concentration peak within one period of periodic dosing.
double time_to_peak(const DrugParams& drug, double injection_period);

// Period-averaged steady-state concentration for a fixed daily dose.
double steady_state_avg(const DrugParams& drug, double daily_units, double injection_period,
                        const Subject& subject);

}  // namespace titration
