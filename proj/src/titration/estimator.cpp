#include "titration/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace titration {

void ObservationLog::add_reading(Minutes time, double fbg) {
  if (!(fbg > 0.0)) throw std::invalid_argument(fmt::format("non-positive FBG reading {}", fbg));
  if (!readings_.empty() && time <= readings_.back().time) {
    throw std::invalid_argument(fmt::format("reading time {} not after {}", time,
                                            readings_.back().time));
  }
  readings_.push_back({time, fbg});
}

void ObservationLog::add_dose(DoseEvent dose) {
  if (dose.units < 0.0) throw std::invalid_argument("negative dose");
  if (!doses_.empty() && dose.time < doses_.back().time) {
    throw std::invalid_argument(fmt::format("dose time {} before {}", dose.time,
                                            doses_.back().time));
  }
  doses_.push_back(dose);
}

std::span<const DoseEvent> ObservationLog::doses_until(Minutes t) const {
  const auto it = std::upper_bound(doses_.begin(), doses_.end(), t,
                                   [](Minutes v, const DoseEvent& d) { return v < d.time; });
  return {doses_.data(), static_cast<std::size_t>(it - doses_.begin())};
}

MapObjective::MapObjective(const ObservationLog& log, const PriorSpec& prior,
                           const DrugParams& drug, const Subject& subject)
    : prior_(prior) {
  prior_.validate();
  log_readings_.reserve(log.readings().size());
  exposures_.reserve(log.readings().size());
  for (const auto& r : log.readings()) {
    log_readings_.push_back(std::log(r.fbg));
    exposures_.push_back(plasma_insulin(log.doses_until(r.time), r.time, drug, subject));
  }
}

double MapObjective::prior_term(const ModelParams& p) const {
  const auto sq = [](double x) { return x * x; };
  return sq(std::log(p.p0 / prior_.mean.p0) / prior_.eta0) +
         sq(std::log(p.p1 / prior_.mean.p1) / prior_.eta1) +
         sq(std::log(p.p2 / prior_.mean.p2) / prior_.eta2);
}

double MapObjective::residual_sum(double p0, double p1) const {
  double s = 0.0;
  for (std::size_t k = 0; k < log_readings_.size(); ++k) {
    const double h = std::max(p0 - p1 * exposures_[k], kPredictionFloor);
    const double r = log_readings_[k] - std::log(h);
    s += r * r;
  }
  return s;
}

double MapObjective::operator()(const ModelParams& p) const {
  if (!(p.p0 > 0.0) || !(p.p1 > 0.0) || !(p.p2 > 0.0)) {
    throw std::invalid_argument("objective requires positive parameters");
  }
  const double t = static_cast<double>(log_readings_.size());
  return residual_sum(p.p0, p.p1) / (p.p2 * p.p2) + 2.0 * t * std::log(p.p2) + prior_term(p);
}

std::array<double, 3> MapObjective::log_gradient(const ModelParams& p) const {
  const double w = 1.0 / (p.p2 * p.p2);
  double g0 = 0.0;
  double g1 = 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < log_readings_.size(); ++k) {
    const double raw = p.p0 - p.p1 * exposures_[k];
    const double h = std::max(raw, kPredictionFloor);
    const double r = log_readings_[k] - std::log(h);
    s += r * r;
    if (raw > kPredictionFloor) {
      g0 += r * (-p.p0 / h);
      g1 += r * (p.p1 * exposures_[k] / h);
    }
  }
  const double t = static_cast<double>(log_readings_.size());
  const auto& m = prior_.mean;
  return {
      2.0 * w * g0 + 2.0 * std::log(p.p0 / m.p0) / (prior_.eta0 * prior_.eta0),
      2.0 * w * g1 + 2.0 * std::log(p.p1 / m.p1) / (prior_.eta1 * prior_.eta1),
      -2.0 * w * s + 2.0 * t + 2.0 * std::log(p.p2 / m.p2) / (prior_.eta2 * prior_.eta2),
  };
}

double MapObjective::profile(double p0, double p1, double p2_floor, double* best_p2) const {
  // In s = log p2 the p2-dependent part S e^{-2s} + 2 t s + (s - mu)^2 / eta^2
  // is strictly convex, so its stationary point (clamped to the floor) is the
  // global minimum.
  const double S = residual_sum(p0, p1);
  const double t = static_cast<double>(log_readings_.size());
  const double mu = std::log(prior_.mean.p2);
  const double inv_eta2 = 1.0 / (prior_.eta2 * prior_.eta2);
  const auto deriv = [&](double s) { return -2.0 * S * std::exp(-2.0 * s) + 2.0 * t + 2.0 * (s - mu) * inv_eta2; };
  const auto curv = [&](double s) { return 4.0 * S * std::exp(-2.0 * s) + 2.0 * inv_eta2; };

  const double floor_s = std::log(p2_floor);
  double s = floor_s;
  if (deriv(floor_s) < 0.0) {
    double lo = floor_s;
    double hi = std::max(floor_s, mu) + 1.0;
    while (deriv(hi) < 0.0) hi += 2.0 * (hi - lo);
    s = std::clamp(S > 0.0 && t > 0.0 ? 0.5 * std::log(S / t) : mu, lo, hi);
    for (int it = 0; it < 100; ++it) {
      const double d = deriv(s);
      if (d > 0.0) hi = s; else lo = s;
      double next = s - d / curv(s);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - s) < 1e-13 || hi - lo < 1e-13) {
        s = next;
        break;
      }
      s = next;
    }
  }
  const double p2 = std::exp(s);
  if (best_p2 != nullptr) *best_p2 = p2;
  return S / (p2 * p2) + 2.0 * t * s + prior_term(ModelParams{p0, p1, p2});
}

double map_objective(const ModelParams& p, const ObservationLog& log, const PriorSpec& prior,
                     const DrugParams& drug, const Subject& subject) {
  return MapObjective(log, prior, drug, subject)(p);
}

namespace {

struct Point {
  double x0;
  double x1;
  double f;
};

struct SearchOutcome {
  Point best;
  bool converged;
  int evaluations;
};

// Nelder-Mead over (log p0, log p1) with p2 profiled out.
template <typename F>
SearchOutcome nelder_mead(const F& f, double x0, double x1, double step, int max_iterations,
                          double tolerance) {
  std::array<Point, 3> s{Point{x0, x1, f(x0, x1)}, Point{x0 + step, x1, f(x0 + step, x1)},
                         Point{x0, x1 + step, f(x0, x1 + step)}};
  int evals = 3;
  const auto order = [&] {
    std::sort(s.begin(), s.end(), [](const Point& a, const Point& b) { return a.f < b.f; });
  };
  for (int it = 0; it < max_iterations; ++it) {
    order();
    const double spread = s[2].f - s[0].f;
    const double size = std::max({std::abs(s[1].x0 - s[0].x0), std::abs(s[1].x1 - s[0].x1),
                                  std::abs(s[2].x0 - s[0].x0), std::abs(s[2].x1 - s[0].x1)});
    if (spread <= tolerance * (std::abs(s[0].f) + 1e-10) && size <= tolerance) {
      return {s[0], true, evals};
    }
    const double c0 = 0.5 * (s[0].x0 + s[1].x0);
    const double c1 = 0.5 * (s[0].x1 + s[1].x1);
    const auto at = [&](double coef) {
      const double a = c0 + coef * (s[2].x0 - c0);
      const double b = c1 + coef * (s[2].x1 - c1);
      ++evals;
      return Point{a, b, f(a, b)};
    };
    const Point r = at(-1.0);
    if (r.f < s[0].f) {
      const Point e = at(-2.0);
      s[2] = e.f < r.f ? e : r;
    } else if (r.f < s[1].f) {
      s[2] = r;
    } else {
      const Point c = r.f < s[2].f ? at(-0.5) : at(0.5);
      if (c.f < std::min(r.f, s[2].f)) {
        s[2] = c;
      } else {
        for (int i = 1; i < 3; ++i) {
          s[i].x0 = s[0].x0 + 0.5 * (s[i].x0 - s[0].x0);
          s[i].x1 = s[0].x1 + 0.5 * (s[i].x1 - s[0].x1);
          s[i].f = f(s[i].x0, s[i].x1);
          ++evals;
        }
      }
    }
  }
  order();
  return {s[0], false, evals};
}

std::optional<ModelParams> least_squares_start(const MapObjective& obj,
                                               std::span<const Observation> readings) {
  const auto n = static_cast<double>(readings.size());
  if (readings.size() < 2) return std::nullopt;
  double mi = 0.0;
  double mz = 0.0;
  for (std::size_t k = 0; k < readings.size(); ++k) {
    mi += obj.exposures()[k];
    mz += readings[k].fbg;
  }
  mi /= n;
  mz /= n;
  double sii = 0.0;
  double siz = 0.0;
  for (std::size_t k = 0; k < readings.size(); ++k) {
    const double di = obj.exposures()[k] - mi;
    sii += di * di;
    siz += di * (readings[k].fbg - mz);
  }
  if (sii < 1e-9) return std::nullopt;
  const double slope = -siz / sii;
  const double intercept = mz + slope * mi;
  if (!(slope > 0.0) || !(intercept > 0.0)) return std::nullopt;
  return ModelParams{intercept, slope, obj.prior().mean.p2};
}

}  // namespace

EstimateResult map_estimate(const ObservationLog& log, const PriorSpec& prior,
                            const DrugParams& drug, const Subject& subject,
                            const EstimatorOptions& options) {
  const MapObjective obj(log, prior, drug, subject);
  if (obj.count() == 0) {
    return {prior.mean, obj(prior.mean), true, 1};
  }

  const auto profiled = [&](double a, double b) {
    return obj.profile(std::exp(a), std::exp(b), options.p2_floor, nullptr);
  };

  std::vector<ModelParams> starts;
  if (options.warm_start) starts.push_back(*options.warm_start);
  starts.push_back(prior.mean);
  if (auto ls = least_squares_start(obj, log.readings())) starts.push_back(*ls);

  EstimateResult best;
  best.objective = std::numeric_limits<double>::infinity();
  int evals = 0;
  for (const auto& start : starts) {
    double x0 = std::log(start.p0);
    double x1 = std::log(start.p1);
    double f_prev = std::numeric_limits<double>::infinity();
    bool converged = false;
    // Restart from the found point until the restart stops improving.
    for (int restart = 0; restart < 4; ++restart) {
      const auto out = nelder_mead(profiled, x0, x1, restart == 0 ? 0.1 : 0.02,
                                   options.max_iterations, options.tolerance);
      evals += out.evaluations;
      converged = out.converged;
      x0 = out.best.x0;
      x1 = out.best.x1;
      const bool settled = f_prev - out.best.f <= options.tolerance * (std::abs(out.best.f) + 1e-10);
      f_prev = std::min(f_prev, out.best.f);
      if (settled) break;
    }
    if (f_prev < best.objective) {
      double p2 = 0.0;
      obj.profile(std::exp(x0), std::exp(x1), options.p2_floor, &p2);
      best.params = {std::exp(x0), std::exp(x1), p2};
      best.objective = obj(best.params);
      best.converged = converged;
    }
  }
  best.evaluations = evals;
  return best;
}

}  // namespace titration
