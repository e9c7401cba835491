#include "titration/export.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <fmt/format.h>

namespace titration {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json mean_sd(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean = xs.empty() ? 0.0 : mean / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  return json{{"mean", mean}, {"sd", sd}};
}

json window_block(const std::vector<const WindowMetrics*>& ws) {
  auto collect = [&](auto field) {
    std::vector<double> out;
    out.reserve(ws.size());
    for (const auto* w : ws) out.push_back(static_cast<double>(field(*w)));
    return mean_sd(out);
  };
  json j;
  j["tir"] = collect([](const WindowMetrics& w) { return w.tir; });
  j["tbr"] = collect([](const WindowMetrics& w) { return w.tbr; });
  j["gmi"] = collect([](const WindowMetrics& w) { return w.gmi; });
  j["mean_cgm"] = collect([](const WindowMetrics& w) { return w.mean_cgm; });
  j["mean_fbg"] = collect([](const WindowMetrics& w) { return w.mean_fbg; });
  j["level2_count"] = collect([](const WindowMetrics& w) { return w.level2_count; });
  j["total_insulin"] = collect([](const WindowMetrics& w) { return w.total_insulin; });
  j["final_dose"] = collect([](const WindowMetrics& w) { return w.final_dose; });
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
  f << text;
  f.close();
  if (!f) throw std::runtime_error(fmt::format("write failed: {}", path.string()));
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t columns) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(f, line);  // header
  for (int n = 2; std::getline(f, line); ++n) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != columns) {
      throw std::runtime_error(fmt::format("{}:{}: expected {} columns, got {}", path.string(), n,
                                           columns, cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::string avatar_csv(const AvatarRun& run) {
  std::string s = "day,dose,fbg,smbg,titrated,delta_u,tir,tbr,mean_cgm,p0,p1,p2\n";
  for (const auto& d : run.days) {
    const auto est = d.estimate;
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", d.day, d.dose, d.true_fbg,
                     opt(d.smbg), d.titrated ? 1 : 0, d.delta_u, d.tir, d.tbr, d.mean_cgm,
                     est ? fmt::format("{}", est->p0) : "", est ? fmt::format("{}", est->p1) : "",
                     est ? fmt::format("{}", est->p2) : "");
  }
  return s;
}

std::string traces_csv(const AvatarRun& run) {
  std::string s = "day,minute,glucose\n";
  for (std::size_t d = 0; d < run.traces.size(); ++d) {
    const auto& t = run.traces[d];
    for (int k = 0; k < kSamplesPerDay; ++k) {
      s += fmt::format("{},{},{}\n", d, k * kCgmStep, t.samples[static_cast<std::size_t>(k)]);
    }
  }
  return s;
}

json summarize(const ScenarioResult& result) {
  const auto& spec = result.spec;
  json j;
  j["policy"] = std::string(to_string(spec.policy));
  j["fbg_window"] = spec.fbg_window;
  j["intervals"] = spec.interval_pattern;
  j["weeks"] = spec.duration_weeks;
  j["miss_probability"] = spec.miss_probability;
  j["master_seed"] = result.master_seed;

  std::vector<const AvatarRun*> ok;
  json errors = json::array();
  for (const auto& run : result.runs) {
    if (run.ok()) {
      ok.push_back(&run);
    } else {
      errors.push_back({{"avatar", run.avatar_id}, {"error", run.error}});
    }
  }
  j["avatars"] = ok.size();
  j["errors"] = errors;

  const std::size_t nwin = static_cast<std::size_t>(spec.days() / kWindowDays);
  json windows = json::array();
  for (std::size_t w = 0; w < nwin; ++w) {
    std::vector<const WindowMetrics*> ws;
    for (const auto* run : ok) ws.push_back(&run->metrics.windows.at(w));
    json block{{"start_day", w * kWindowDays}, {"end_week", (w + 1) * 2}};
    block.update(window_block(ws));
    windows.push_back(std::move(block));
  }
  j["windows"] = std::move(windows);

  json checkpoints = json::object();
  for (const int week : kCheckpointWeeks) {
    if (week > spec.duration_weeks) continue;
    std::vector<const WindowMetrics*> ws;
    int fasting = 0, hba1c = 0, cgm = 0;
    for (const auto* run : ok) {
      const auto& w = run->metrics.at_week(week);
      ws.push_back(&w);
      const auto a = attainment(w);
      fasting += a.fasting_target;
      hba1c += a.hba1c_target;
      cgm += a.cgm_target;
    }
    const double n = ok.empty() ? 1.0 : static_cast<double>(ok.size());
    json block = window_block(ws);
    block["attainment"] = {{"fasting", 100.0 * fasting / n},
                           {"hba1c", 100.0 * hba1c / n},
                           {"cgm", 100.0 * cgm / n}};
    checkpoints[fmt::format("week_{}", week)] = std::move(block);
  }
  j["checkpoints"] = std::move(checkpoints);
  return j;
}

json summarize(const std::vector<ScenarioResult>& results, const ExportInfo& info) {
  json j;
  j["population_seed"] = info.population_seed;
  j["population_size"] = info.population_size;
  json scenarios = json::object();
  for (const auto& r : results) scenarios[r.spec.name] = summarize(r);
  j["scenarios"] = std::move(scenarios);
  return j;
}

void export_results(const std::vector<ScenarioResult>& results, const ExportInfo& info,
                    const fs::path& out) {
  if (results.empty()) throw std::invalid_argument("nothing to export");
  for (const auto& r : results) {
    if (r.runs.empty()) {
      throw std::invalid_argument(fmt::format("scenario {} has an empty population", r.spec.name));
    }
  }
  const auto summary = summarize(results, info);

  make_dirs(out);
  for (const auto& r : results) {
    const fs::path dir = out / r.spec.name;
    make_dirs(dir);
    for (const auto& run : r.runs) {
      write_file(dir / fmt::format("avatar_{}.csv", run.avatar_id), avatar_csv(run));
      if (!run.traces.empty()) {
        write_file(dir / fmt::format("traces_{}.csv", run.avatar_id), traces_csv(run));
      }
    }
  }
  write_file(out / "summary.json", summary.dump(2) + "\n");
}

MetricsReport recompute_metrics(const fs::path& avatar_csv_path, const fs::path& traces_csv_path) {
  const auto days = read_csv(avatar_csv_path, 12);
  const auto samples = read_csv(traces_csv_path, 3);
  if (samples.size() != days.size() * static_cast<std::size_t>(kSamplesPerDay)) {
    throw std::runtime_error(fmt::format("{}: {} samples for {} days", traces_csv_path.string(),
                                         samples.size(), days.size()));
  }
  std::vector<double> fbg, dose;
  std::vector<GlucoseTrace> traces(days.size());
  for (std::size_t d = 0; d < days.size(); ++d) {
    dose.push_back(std::stod(days[d][1]));
    fbg.push_back(std::stod(days[d][2]));
    traces[d].start = static_cast<Minutes>(d) * kMinutesPerDay;
    for (int k = 0; k < kSamplesPerDay; ++k) {
      const auto& row = samples[d * kSamplesPerDay + static_cast<std::size_t>(k)];
      traces[d].samples[static_cast<std::size_t>(k)] = std::stod(row[2]);
    }
  }
  return compute_metrics(traces, fbg, dose);
}

std::string format_report(const json& summary) {
  std::string s;
  const auto& scenarios = summary.at("scenarios");
  for (const int week : kCheckpointWeeks) {
    const auto key = fmt::format("week_{}", week);
    bool any = false;
    for (const auto& [_, sc] : scenarios.items()) any |= sc.at("checkpoints").contains(key);
    if (!any) continue;
    s += fmt::format("Week {}\n", week);
    s += fmt::format("{:<12}{:>14}{:>12}{:>12}{:>14}{:>14}{:>9}{:>9}{:>9}\n", "scenario", "TIR %",
                     "TBR %", "GMI %", "FBG mg/dL", "dose U", "fast %", "A1c %", "CGM %");
    for (const auto& [name, sc] : scenarios.items()) {
      if (!sc.at("checkpoints").contains(key)) continue;
      const auto& c = sc.at("checkpoints").at(key);
      auto ms = [&](const char* f, int prec) {
        return fmt::format("{:.{}f}±{:.{}f}", c.at(f).at("mean").get<double>(), prec,
                           c.at(f).at("sd").get<double>(), prec);
      };
      const auto& a = c.at("attainment");
      s += fmt::format("{:<12}{:>14}{:>12}{:>12}{:>14}{:>14}{:>9.1f}{:>9.1f}{:>9.1f}\n", name,
                       ms("tir", 1), ms("tbr", 1), ms("gmi", 2), ms("mean_fbg", 0),
                       ms("final_dose", 1), a.at("fasting").get<double>(),
                       a.at("hba1c").get<double>(), a.at("cgm").get<double>());
    }
    s += "\n";
  }
  return s;
}

}  // namespace titration
