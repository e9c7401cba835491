#pragma once

// The controller's internal fasting-glucose model: FBG falls linearly with
// plasma insulin, y = p0 - p1 * I(u), with a multiplicative (log-normal)
// variability envelope of log-scale width p2.

#include <span>
#include <vector>

#include "titration/pk.hpp"

namespace titration {

struct ModelParams {
  double p0 = 150.0;  // mg/dL, fasting glucose at zero insulin
  double p1 = 5.0;    // mg/dL per mU/L
  double p2 = 0.15;   // log-scale sd of measurement vs prediction

  void validate() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct PriorSpec {
  ModelParams mean{150.0, 5.0, 0.15};
  double eta0 = 0.25;
  double eta1 = 0.5;
  double eta2 = 1.0;

  void validate() const;
  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

// Predictions feeding ratio-based costs are floored here.
inline constexpr double kPredictionFloor = 1.0;

struct Envelope {
  double low = 0.0;
  double high = 0.0;
};

double predict_fbg(const ModelParams& params, std::span<const DoseEvent> doses,
                   const DrugParams& drug, const Subject& subject, Minutes t);

// Plasma insulin over a prediction horizon, split into the part already
// committed by past doses and the response to one unit of the constant future
// dose. Predictions are linear in the future dose:
//   y_d(u) = p0 - p1 * (committed[d] + u * unit_response[d]).
// History uses the truncated evaluator.
struct TrajectoryBasis {
  Minutes start = 0;
  std::vector<double> committed;
  std::vector<double> unit_response;

  std::vector<double> predict(const ModelParams& params, double u_next) const;
  std::size_t size() const { return committed.size(); }
};

TrajectoryBasis trajectory_basis(std::span<const DoseEvent> history, int horizon_days,
                                 Minutes start, const DrugParams& drug, const Subject& subject);

// Predicted fasting values at start + d * 1440 for d = 1..horizon_days+1, with
// u_next injected at start + d * 1440 for d = 0..horizon_days. `history` holds
// doses strictly before `start`.
std::vector<double> predict_trajectory(const ModelParams& params,
                                       std::span<const DoseEvent> history, double u_next,
                                       int horizon_days, Minutes start, const DrugParams& drug,
                                       const Subject& subject);

Envelope envelope(double y, double p2, double alpha);

}  // namespace titration
