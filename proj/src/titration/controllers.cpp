#include "titration/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace titration {

namespace {
constexpr double kSocStep = 2.0;
}

void TitrationConfig::validate() const {
  if (!(fbg_low > 0.0) || !(fbg_low < fbg_high)) {
    throw std::invalid_argument(
        fmt::format("require 0 < FBG_L < FBG_U (got {}, {})", fbg_low, fbg_high));
  }
  if (!(gamma > 0.0) || !(xi > 0.0)) throw std::invalid_argument("gamma and xi must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (horizon_days < 1) throw std::invalid_argument("horizon must be at least one day");
  if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("beta must lie in (0, 1]");
  if (!(du_min >= 1.0)) throw std::invalid_argument("du_min must be at least 1 U");
  if (titration_interval < 1) throw std::invalid_argument("titration interval must be >= 1 day");
  if (fbg_window < 1) throw std::invalid_argument("FBG window must be >= 1");
}

PerformanceCost cost_performance(std::span<const double> trajectory, const ModelParams& params,
                                 const TitrationConfig& config) {
  if (trajectory.empty()) throw std::invalid_argument("empty trajectory");
  const double widen = std::exp(config.alpha * params.p2);
  double hypo = 0.0;
  double above_low = 0.0;
  double above_high = 0.0;
  for (const double raw : trajectory) {
    const double y = std::max(raw, kPredictionFloor);
    const double lo = y / config.fbg_low / widen - 1.0;
    const double hi = y / config.fbg_high * widen - 1.0;
    if (lo < 0.0) hypo += lo * lo;
    else above_low += lo * lo;
    if (hi > 0.0) above_high += hi * hi;
  }
  const double inv_t = 1.0 / static_cast<double>(config.horizon_days);
  return {hypo * inv_t, std::max(above_low, above_high) * inv_t};
}

double cost_regularization(double delta_u, const ModelParams& params, const PriorSpec& prior,
                           const TitrationConfig& config) {
  const double r = params.p1 / prior.mean.p1 * delta_u / config.du_min;
  return r * r;
}

double solve_delta_u(const std::function<double(double)>& cost, double bound, double du_min,
                     double lower) {
  if (!(bound >= du_min)) {
    throw std::invalid_argument(fmt::format("bound {} below minimum step {}", bound, du_min));
  }
  std::vector<double> magnitudes;
  for (double k = 1.0; k <= bound; k += 1.0) magnitudes.push_back(k);
  if (magnitudes.empty() || magnitudes.back() != bound) magnitudes.push_back(bound);

  double best = 0.0;
  double best_cost = lower <= 0.0 ? cost(0.0) : std::numeric_limits<double>::infinity();
  for (const double m : magnitudes) {
    for (const double c : {-m, m}) {
      if (c < lower) continue;
      const double v = cost(c);
      if (v < best_cost) {
        best_cost = v;
        best = c;
      }
    }
  }
  return best;
}

double dose_change_bound(double u_prev, const TitrationConfig& config) {
  return std::max(config.du_min, config.beta * u_prev);
}

DoseRecommendation rhc_recommend(const ModelParams& params, const PriorSpec& prior,
                                 const TitrationConfig& config,
                                 std::span<const DoseEvent> history, double u_prev, Minutes now,
                                 const DrugParams& drug, const Subject& subject) {
  if (u_prev < 0.0) throw std::invalid_argument("previous dose is negative");
  config.validate();
  params.validate();

  const auto basis = trajectory_basis(history, config.horizon_days, now, drug, subject);
  const auto evaluate = [&](double delta_u) {
    const auto traj = basis.predict(params, u_prev + delta_u);
    const auto perf = cost_performance(traj, params, config);
    const double reg = cost_regularization(delta_u, params, prior, config);
    return CostBreakdown{perf.q_hypo, perf.q_hyper, reg,
                         config.gamma * (config.xi * perf.q_hypo + perf.q_hyper) + reg};
  };

  DoseRecommendation rec;
  rec.bound = dose_change_bound(u_prev, config);
  rec.delta_u = solve_delta_u([&](double du) { return evaluate(du).total; }, rec.bound,
                              config.du_min, -u_prev);
  rec.new_dose = u_prev + rec.delta_u;
  rec.bound_active = std::abs(rec.delta_u) == rec.bound;
  rec.cost = evaluate(rec.delta_u);
  rec.trajectory = basis.predict(params, rec.new_dose);
  for (const double y : rec.trajectory) {
    const auto env = envelope(std::max(y, kPredictionFloor), params.p2, config.alpha);
    rec.envelope_low.push_back(env.low);
    rec.envelope_high.push_back(env.high);
  }
  return rec;
}

double soc_recommend(std::span<const double> readings, const TitrationConfig& config) {
  if (readings.empty()) throw std::invalid_argument("no readings in the titration window");
  if (std::any_of(readings.begin(), readings.end(),
                  [&](double z) { return z < config.fbg_low; })) {
    return -kSocStep;
  }
  const double mean =
      std::accumulate(readings.begin(), readings.end(), 0.0) / static_cast<double>(readings.size());
  return mean > config.fbg_high ? kSocStep : 0.0;
}

SocPolicy::SocPolicy(TitrationConfig config) : config_(config) { config_.validate(); }

TitrationDecision SocPolicy::decide(const TitrationContext& ctx) {
  if (ctx.window_readings.empty()) return {};
  const double step = soc_recommend(ctx.window_readings, config_);
  return {true, std::max(step, -ctx.u_prev), std::nullopt};
}

RhcPolicy::RhcPolicy(TitrationConfig config, PriorSpec prior, DrugParams drug, Subject subject)
    : config_(config),
      prior_(prior),
      drug_(std::move(drug)),
      subject_(subject),
      estimate_(prior.mean) {
  config_.validate();
  prior_.validate();
  drug_.validate();
  subject_.validate();
}

TitrationDecision RhcPolicy::decide(const TitrationContext& ctx) {
  if (ctx.log == nullptr) throw std::invalid_argument("RHC policy needs an observation log");
  const auto& log = *ctx.log;
  if (log.readings().size() > fitted_count_) {
    EstimatorOptions opts;
    if (fitted_) opts.warm_start = estimate_;
    const auto fit = map_estimate(log, prior_, drug_, subject_, opts);
    // A non-converged refit keeps the previous estimate.
    if (fit.converged) {
      estimate_ = fit.params;
      fitted_ = true;
    }
    fitted_count_ = log.readings().size();
  }
  const auto history = log.doses_until(ctx.now - 1);
  const auto rec = rhc_recommend(estimate_, prior_, config_, history, ctx.u_prev, ctx.now, drug_,
                                 subject_);
  return {true, rec.delta_u, estimate_};
}

}  // namespace titration
