#pragma once

// Result files written by the harness:
//
//   <out>/summary.json                  per-scenario windows and checkpoints
//   <out>/<scenario>/avatar_<id>.csv    daily series
//   <out>/<scenario>/traces_<id>.csv    CGM samples (only when traces were kept)
//
// Column and field definitions are in docs/schemas.md. Numbers are written in
// shortest round-trip form so identical results give identical bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "titration/scenario.hpp"

namespace titration {

inline constexpr int kCheckpointWeeks[] = {8, 26, 52};

struct ExportInfo {
  std::uint64_t population_seed = 0;
  std::size_t population_size = 0;
};

nlohmann::ordered_json summarize(const ScenarioResult& result);
nlohmann::ordered_json summarize(const std::vector<ScenarioResult>& results,
                                 const ExportInfo& info);

// Throws before touching the filesystem if any scenario has no avatars.
// Filesystem failures are reported with the offending path.
void export_results(const std::vector<ScenarioResult>& results, const ExportInfo& info,
                    const std::filesystem::path& out);

std::string avatar_csv(const AvatarRun& run);
std::string traces_csv(const AvatarRun& run);

// Reads back the daily series and CGM samples of one avatar and recomputes its
// 14-day windows.
MetricsReport recompute_metrics(const std::filesystem::path& avatar_csv_path,
                                const std::filesystem::path& traces_csv_path);

// Plain-text tables of a summary.json document, one per checkpoint.
std::string format_report(const nlohmann::ordered_json& summary);

}  // namespace titration
