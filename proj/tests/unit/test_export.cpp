#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "titration/export.hpp"

using namespace titration;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

std::vector<ScenarioResult> small_run(bool traces, int weeks = 8) {
  PopulationTargets t;
  t.n = 4;
  const auto pop = generate_population(t, 21);
  RunSettings settings;
  settings.keep_traces = traces;
  std::vector<ScenarioResult> out;
  for (const auto& spec : canonical_scenarios(weeks)) out.push_back(run_scenario(spec, pop, settings, 7));
  return out;
}

}  // namespace

TEST_CASE("summary has one block per scenario with checkpoints") {
  const auto results = small_run(false, 26);
  const auto j = summarize(results, {21, 4});
  const auto& sc = j.at("scenarios");
  REQUIRE(sc.size() == 5);
  std::vector<std::string> keys;
  for (const auto& [k, _] : sc.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"SoC-3", "SoC-1", "RHC-3", "RHC-1", "RHC-1-acc"});
  const auto& soc = sc.at("SoC-3");
  CHECK(soc.at("windows").size() == 13);
  CHECK(soc.at("checkpoints").contains("week_8"));
  CHECK(soc.at("checkpoints").contains("week_26"));
  CHECK_FALSE(soc.at("checkpoints").contains("week_52"));
  CHECK(soc.at("avatars") == 4);
  CHECK(soc.at("errors").empty());

  // Checkpoint means agree with the per-avatar windows.
  double tir = 0;
  for (const auto& r : results[0].runs) tir += r.metrics.at_week(8).tir;
  CHECK(soc.at("checkpoints").at("week_8").at("tir").at("mean").get<double>() ==
        doctest::Approx(tir / 4));
  const auto& att = soc.at("checkpoints").at("week_26").at("attainment");
  for (const char* k : {"fasting", "hba1c", "cgm"}) {
    const double v = att.at(k).get<double>();
    CHECK(v >= 0.0);
    CHECK(v <= 100.0);
    CHECK(std::fmod(v, 25.0) == 0.0);
  }
}

TEST_CASE("export writes per-avatar series and is byte-stable") {
  const auto results = small_run(true);
  const auto a = fresh_dir("titration_export_a");
  const auto b = fresh_dir("titration_export_b");
  export_results(results, {21, 4}, a);
  export_results(small_run(true), {21, 4}, b);

  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a);
    CHECK(slurp(e.path()) == slurp(b / rel));
  }
  CHECK(files == 1 + 5 * 4 * 2);

  const auto csv = slurp(a / "RHC-1" / "avatar_0.csv");
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "day,dose,fbg,smbg,titrated,delta_u,tir,tbr,mean_cgm,p0,p1,p2");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 56);

  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("metrics recomputed from dumped traces equal the run's") {
  const auto results = small_run(true);
  const auto dir = fresh_dir("titration_export_metrics");
  export_results(results, {21, 4}, dir);
  for (const auto& run : results[2].runs) {
    const auto id = std::to_string(run.avatar_id);
    const auto r = recompute_metrics(dir / "RHC-3" / ("avatar_" + id + ".csv"),
                                     dir / "RHC-3" / ("traces_" + id + ".csv"));
    REQUIRE(r.windows.size() == run.metrics.windows.size());
    for (std::size_t w = 0; w < r.windows.size(); ++w) CHECK(r.windows[w] == run.metrics.windows[w]);
  }
  fs::remove_all(dir);
}

TEST_CASE("empty population is an error and writes nothing") {
  ScenarioResult empty{ScenarioSpec::preset("SoC-3"), 1, {}};
  const auto dir = fresh_dir("titration_export_empty");
  CHECK_THROWS_AS(export_results({empty}, {1, 0}, dir), std::invalid_argument);
  CHECK_FALSE(fs::exists(dir));
  CHECK_THROWS_AS(export_results({}, {1, 0}, dir), std::invalid_argument);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("filesystem errors carry the path") {
  const auto results = small_run(false, 2);
  const auto blocker = fs::temp_directory_path() / "titration_export_blocker";
  fs::remove_all(blocker);
  { std::ofstream(blocker) << "x"; }
  try {
    export_results(results, {21, 4}, blocker / "out");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(blocker.string()) != std::string::npos);
  }
  fs::remove(blocker);
}

TEST_CASE("failed avatars appear in the summary") {
  PopulationTargets t;
  t.n = 3;
  auto pop = generate_population(t, 2);
  pop[2].body_weight = -1;
  auto spec = ScenarioSpec::preset("RHC-1");
  spec.duration_weeks = 2;
  const auto j = summarize(run_scenario(spec, pop, {}, 1));
  CHECK(j.at("avatars") == 2);
  REQUIRE(j.at("errors").size() == 1);
  CHECK(j.at("errors")[0].at("avatar") == 2);
}

TEST_CASE("report tables") {
  const auto text = format_report(summarize(small_run(false, 8), {21, 4}));
  CHECK(text.find("Week 8") != std::string::npos);
  CHECK(text.find("Week 26") == std::string::npos);
  CHECK(text.find("RHC-1-acc") != std::string::npos);
}
