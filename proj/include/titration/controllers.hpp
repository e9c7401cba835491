#pragma once

// Dose-recommendation policies: the receding-horizon control-to-range
// optimizer and the standard-of-care threshold rule.

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "titration/estimator.hpp"
#include "titration/fasting_model.hpp"
#include "titration/pk.hpp"

namespace titration {

struct TitrationConfig {
  double fbg_low = 72.0;    // FBG_L, mg/dL
  double fbg_high = 90.0;   // FBG_U, mg/dL
  double gamma = 250.0;     // performance vs regularization
  double xi = 100.0;        // hypo vs hyper
  double alpha = 1.65;      // envelope width in units of p2
  int horizon_days = 10;    // T
  double beta = 0.15;       // max relative dose change
  double du_min = 1.0;      // U
  int titration_interval = 3;  // days
  int fbg_window = 3;          // readings inspected per titration

  void validate() const;
  friend bool operator==(const TitrationConfig&, const TitrationConfig&) = default;
};

struct CostBreakdown {
  double q_hypo = 0.0;
  double q_hyper = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

struct DoseRecommendation {
  double delta_u = 0.0;
  double new_dose = 0.0;
  double bound = 0.0;        // max(du_min, beta * u_prev)
  bool bound_active = false; // |delta_u| sits on the bound
  CostBreakdown cost;
  std::vector<double> trajectory;  // fasting predictions for the chosen dose
  std::vector<double> envelope_low;
  std::vector<double> envelope_high;
};

struct PerformanceCost {
  double q_hypo = 0.0;
  double q_hyper = 0.0;
};

PerformanceCost cost_performance(std::span<const double> trajectory, const ModelParams& params,
                                 const TitrationConfig& config);

double cost_regularization(double delta_u, const ModelParams& params, const PriorSpec& prior,
                           const TitrationConfig& config);

// Minimizes `cost` over {0, +-1, ..., +-floor(bound)} U {+-bound}, restricted to
// delta_u >= lower. Ties go to the smaller magnitude, then to the negative side.
double solve_delta_u(const std::function<double(double)>& cost, double bound, double du_min,
                     double lower = -std::numeric_limits<double>::infinity());

double dose_change_bound(double u_prev, const TitrationConfig& config);

// Recommendation at decision time `now` (the next injection). `history` holds
// doses before `now`; u_prev is the dose currently in use.
DoseRecommendation rhc_recommend(const ModelParams& params, const PriorSpec& prior,
                                 const TitrationConfig& config,
                                 std::span<const DoseEvent> history, double u_prev, Minutes now,
                                 const DrugParams& drug, const Subject& subject);

// Standard-of-care rule on the readings in the titration window.
double soc_recommend(std::span<const double> readings, const TitrationConfig& config);

// Everything a policy may look at when a titration is due.
struct TitrationContext {
  Minutes now = 0;
  double u_prev = 0.0;
  const ObservationLog* log = nullptr;     // all readings and doses so far
  std::span<const double> window_readings; // readings inside the SoC window
};

struct TitrationDecision {
  bool applied = false;  // false when the titration was skipped
  double delta_u = 0.0;
  std::optional<ModelParams> estimate;
};

class TitrationPolicy {
 public:
  virtual ~TitrationPolicy() = default;
  virtual TitrationDecision decide(const TitrationContext& ctx) = 0;
  virtual std::string name() const = 0;
};

class SocPolicy final : public TitrationPolicy {
 public:
  explicit SocPolicy(TitrationConfig config);
  TitrationDecision decide(const TitrationContext& ctx) override;
  std::string name() const override { return "soc"; }

 private:
  TitrationConfig config_;
};

// Refits the MAP estimate on the full log at every titration (warm-started from
// the previous estimate) and applies the receding-horizon recommendation.
class RhcPolicy final : public TitrationPolicy {
 public:
  RhcPolicy(TitrationConfig config, PriorSpec prior, DrugParams drug, Subject subject);
  TitrationDecision decide(const TitrationContext& ctx) override;
  std::string name() const override { return "rhc"; }

  const ModelParams& estimate() const { return estimate_; }

 private:
  TitrationConfig config_;
  PriorSpec prior_;
  DrugParams drug_;
  Subject subject_;
  ModelParams estimate_;
  bool fitted_ = false;
  std::size_t fitted_count_ = 0;
};

}  // namespace titration
