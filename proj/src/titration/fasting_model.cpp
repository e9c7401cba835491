#include "titration/fasting_model.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace titration {

void ModelParams::validate() const {
  if (!(p0 > 0.0) || !(p1 > 0.0) || !(p2 >= 0.0)) {
    throw std::invalid_argument(
        fmt::format("model params out of domain: p0={}, p1={}, p2={}", p0, p1, p2));
  }
}

void PriorSpec::validate() const {
  if (!(mean.p0 > 0.0) || !(mean.p1 > 0.0) || !(mean.p2 > 0.0)) {
    throw std::invalid_argument("prior means must be positive");
  }
  if (!(eta0 > 0.0) || !(eta1 > 0.0) || !(eta2 > 0.0)) {
    throw std::invalid_argument("prior log-sds must be positive");
  }
}

double predict_fbg(const ModelParams& params, std::span<const DoseEvent> doses,
                   const DrugParams& drug, const Subject& subject, Minutes t) {
  params.validate();
  return params.p0 - params.p1 * plasma_insulin(doses, t, drug, subject);
}

TrajectoryBasis trajectory_basis(std::span<const DoseEvent> history, int horizon_days,
                                 Minutes start, const DrugParams& drug, const Subject& subject) {
  if (horizon_days < 1) throw std::invalid_argument("horizon must be at least one day");
  if (!history.empty() && history.back().time >= start) {
    throw std::invalid_argument("history must end before the prediction start");
  }
  subject.validate();

  TrajectoryBasis basis;
  basis.start = start;
  const double gain = pk_gain(drug, subject);
  drug.validate();
  for (int d = 1; d <= horizon_days + 1; ++d) {
    const Minutes t = start + d * kMinutesPerDay;
    basis.committed.push_back(plasma_insulin(history, t, drug, subject));
    // Future doses at start + j days, j < d; the one injected at t contributes nothing yet.
    double k = 0.0;
    for (int j = 0; j < d; ++j) k += pk_kernel(drug, (d - j) * kMinutesPerDay);
    basis.unit_response.push_back(gain * k);
  }
  return basis;
}

std::vector<double> TrajectoryBasis::predict(const ModelParams& params, double u_next) const {
  std::vector<double> out(committed.size());
  for (std::size_t i = 0; i < committed.size(); ++i) {
    out[i] = params.p0 - params.p1 * (committed[i] + u_next * unit_response[i]);
  }
  return out;
}

std::vector<double> predict_trajectory(const ModelParams& params,
                                       std::span<const DoseEvent> history, double u_next,
                                       int horizon_days, Minutes start, const DrugParams& drug,
                                       const Subject& subject) {
  if (u_next < 0.0) throw std::invalid_argument("dose must be non-negative");
  params.validate();
  return trajectory_basis(history, horizon_days, start, drug, subject).predict(params, u_next);
}

Envelope envelope(double y, double p2, double alpha) {
  const double w = std::exp(alpha * p2);
  return {y / w, y * w};
}

}  // namespace titration
