#pragma once

// Glycemic outcome metrics over fixed 14-day windows and the per-avatar
// target-attainment definitions.

#include <span>
#include <vector>

#include "titration/avatar.hpp"

namespace titration {

inline constexpr int kWindowDays = 14;
inline constexpr double kTirLow = 70.0;
inline constexpr double kTirHigh = 180.0;
inline constexpr double kLevel2Hypo = 54.0;

struct WindowMetrics {
  int start_day = 0;
  int days = 0;
  double tir = 0.0;       // % of CGM samples in [70, 180]
  double tbr = 0.0;       // % of CGM samples below 70
  double mean_cgm = 0.0;  // mg/dL
  double gmi = 0.0;       // %
  double mean_fbg = 0.0;  // mg/dL
  int level2_count = 0;   // fasting values below 54 mg/dL
  double total_insulin = 0.0;  // U
  double final_dose = 0.0;     // U/day on the window's last day

  friend bool operator==(const WindowMetrics&, const WindowMetrics&) = default;
};

struct MetricsReport {
  std::vector<WindowMetrics> windows;

  // Window ending at the given week (weeks must be a multiple of two).
  const WindowMetrics& at_week(int week) const;
};

struct TargetAttainment {
  bool fasting_target = false;  // mean FBG within [80, 130]
  bool hba1c_target = false;    // GMI < 7 % and no fasting value < 54
  bool cgm_target = false;      // TIR > 70 % and TBR < 4 %
};

double gmi(double mean_glucose);

// Metrics over one window: one trace, one fasting value and one dose per day.
WindowMetrics compute_window(std::span<const GlucoseTrace> traces, std::span<const double> fbg,
                             std::span<const double> doses, int start_day = 0);

// Partitions the series into consecutive full 14-day windows.
MetricsReport compute_metrics(std::span<const GlucoseTrace> traces, std::span<const double> fbg,
                              std::span<const double> doses);

TargetAttainment attainment(const WindowMetrics& window);

}  // namespace titration
