#include "titration/metrics.hpp"

#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace titration {

const WindowMetrics& MetricsReport::at_week(int week) const {
  const int days = week * 7;
  if (week <= 0 || days % kWindowDays != 0) {
    throw std::invalid_argument(fmt::format("no window ends at week {}", week));
  }
  const auto index = static_cast<std::size_t>(days / kWindowDays - 1);
  if (index >= windows.size()) {
    throw std::out_of_range(fmt::format("week {} beyond the simulated horizon", week));
  }
  return windows[index];
}

double gmi(double mean_glucose) { return 3.31 + 0.02392 * mean_glucose; }

WindowMetrics compute_window(std::span<const GlucoseTrace> traces, std::span<const double> fbg,
                             std::span<const double> doses, int start_day) {
  if (traces.empty()) throw std::invalid_argument("no CGM traces");
  if (fbg.size() != traces.size() || doses.size() != traces.size()) {
    throw std::invalid_argument("traces, fasting values and doses must cover the same days");
  }
  std::size_t in_range = 0;
  std::size_t below = 0;
  double sum = 0.0;
  for (const auto& trace : traces) {
    for (const double g : trace.samples) {
      if (g < kTirLow) ++below;
      else if (g <= kTirHigh) ++in_range;
      sum += g;
    }
  }
  const auto samples = static_cast<double>(traces.size() * kSamplesPerDay);
  WindowMetrics w;
  w.start_day = start_day;
  w.days = static_cast<int>(traces.size());
  w.tir = 100.0 * static_cast<double>(in_range) / samples;
  w.tbr = 100.0 * static_cast<double>(below) / samples;
  w.mean_cgm = sum / samples;
  w.gmi = gmi(w.mean_cgm);
  w.mean_fbg = std::accumulate(fbg.begin(), fbg.end(), 0.0) / static_cast<double>(fbg.size());
  for (const double v : fbg) {
    if (v < kLevel2Hypo) ++w.level2_count;
  }
  w.total_insulin = std::accumulate(doses.begin(), doses.end(), 0.0);
  w.final_dose = doses.back();
  return w;
}

MetricsReport compute_metrics(std::span<const GlucoseTrace> traces, std::span<const double> fbg,
                              std::span<const double> doses) {
  if (traces.empty()) throw std::invalid_argument("no CGM traces");
  if (traces.size() < static_cast<std::size_t>(kWindowDays)) {
    throw std::invalid_argument("need at least one full 14-day window");
  }
  MetricsReport report;
  for (std::size_t start = 0; start + kWindowDays <= traces.size(); start += kWindowDays) {
    report.windows.push_back(compute_window(traces.subspan(start, kWindowDays),
                                            fbg.subspan(start, kWindowDays),
                                            doses.subspan(start, kWindowDays),
                                            static_cast<int>(start)));
  }
  return report;
}

TargetAttainment attainment(const WindowMetrics& w) {
  return {
      w.mean_fbg >= 80.0 && w.mean_fbg <= 130.0,
      w.gmi < 7.0 && w.level2_count == 0,
      w.tir > 70.0 && w.tbr < 4.0,
  };
}

}  // namespace titration
