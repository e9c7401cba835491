#pragma once

// Maximum-a-posteriori estimation of the fasting-model parameters from the
// full history of fasting measurements and injected doses.
//
// Measurements are log-normal around the model prediction with log-sd p2, and
// each parameter has an independent log-normal prior. The negative log
// posterior (up to constants, times two) is
//
//   (1/p2^2) sum_k log(z_k / h_p(k))^2 + 2 t log(p2) + sum_i log(p_i / m_i)^2 / eta_i^2

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "titration/fasting_model.hpp"
#include "titration/pk.hpp"

namespace titration {

struct Observation {
  Minutes time = 0;
  double fbg = 0.0;  // mg/dL

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Fasting readings plus the dose history they respond to. Readings have
// strictly increasing times and positive values; doses are time-ordered.
class ObservationLog {
 public:
  void add_reading(Minutes time, double fbg);
  void add_dose(DoseEvent dose);

  std::span<const Observation> readings() const { return readings_; }
  std::span<const DoseEvent> doses() const { return doses_; }
  bool empty() const { return readings_.empty(); }

  // Doses injected at or before t.
  std::span<const DoseEvent> doses_until(Minutes t) const;

 private:
  std::vector<Observation> readings_;
  std::vector<DoseEvent> doses_;
};

inline constexpr double kP2Floor = 0.01;

// Precomputes per-reading plasma insulin so the objective costs O(readings).
class MapObjective {
 public:
  MapObjective(const ObservationLog& log, const PriorSpec& prior, const DrugParams& drug,
               const Subject& subject);

  double operator()(const ModelParams& p) const;

  // Gradient with respect to (log p0, log p1, log p2).
  std::array<double, 3> log_gradient(const ModelParams& p) const;

  // Sum of squared log residuals for (p0, p1).
  double residual_sum(double p0, double p1) const;

  // Minimum over p2 >= p2_floor for fixed (p0, p1); writes the minimizing p2.
  double profile(double p0, double p1, double p2_floor, double* best_p2) const;

  std::size_t count() const { return log_readings_.size(); }
  std::span<const double> exposures() const { return exposures_; }
  const PriorSpec& prior() const { return prior_; }

 private:
  double prior_term(const ModelParams& p) const;

  PriorSpec prior_;
  std::vector<double> log_readings_;
  std::vector<double> exposures_;
};

double map_objective(const ModelParams& p, const ObservationLog& log, const PriorSpec& prior,
                     const DrugParams& drug, const Subject& subject);

struct EstimatorOptions {
  std::optional<ModelParams> warm_start;
  double p2_floor = kP2Floor;
  int max_iterations = 2000;
  double tolerance = 1e-6;
};

struct EstimateResult {
  ModelParams params;
  double objective = 0.0;
  bool converged = false;
  int evaluations = 0;
};

EstimateResult map_estimate(const ObservationLog& log, const PriorSpec& prior,
                            const DrugParams& drug, const Subject& subject,
                            const EstimatorOptions& options = {});

}  // namespace titration
