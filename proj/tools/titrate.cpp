// titrate: run the titration experiments and inspect their outputs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "titration/config.hpp"
#include "titration/export.hpp"
#include "titration/scenario.hpp"

namespace fs = std::filesystem;
using namespace titration;

namespace {

struct RunArgs {
  std::vector<std::string> scenarios{"all"};
  std::string population;
  std::uint64_t seed = 1;
  int weeks = 0;
  std::size_t n = 0;
  std::string out = "out";
  std::string config;
  bool dump_traces = false;
};

struct GenArgs {
  std::size_t n = 427;
  std::uint64_t seed = 1;
  std::vector<double> targets;
  std::string out = "population.jsonl";
};

int cmd_run(const RunArgs& a) {
  HarnessConfig cfg = a.config.empty() ? HarnessConfig{} : load_config(a.config);
  if (a.weeks > 0) {
    cfg.weeks = a.weeks;
    for (auto& s : cfg.scenarios) s.duration_weeks = a.weeks;
  }
  if (a.n > 0) cfg.population.n = a.n;
  cfg.run.keep_traces = a.dump_traces;

  std::vector<ScenarioSpec> specs;
  for (const auto& name : a.scenarios) {
    if (name == "all") {
      for (const auto& s : cfg.scenarios) specs.push_back(s);
    } else {
      specs.push_back(cfg.scenario(name));
    }
  }
  for (auto& s : specs) s.validate();

  const auto population = a.population.empty() ? generate_population(cfg.population, a.seed)
                                               : load_population(a.population);
  if (population.empty()) throw std::runtime_error("population is empty");

  std::vector<ScenarioResult> results;
  for (const auto& spec : specs) {
    const auto t0 = std::chrono::steady_clock::now();
    results.push_back(run_scenario(spec, population, cfg.run, a.seed));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::size_t failed = 0;
    for (const auto& r : results.back().runs) failed += !r.ok();
    std::cerr << fmt::format("{:<10} {} avatars, {} failed, {:.1f}s\n", spec.name,
                             population.size(), failed, secs);
  }

  export_results(results, {a.seed, population.size()}, a.out);
  std::cout << format_report(summarize(results, {a.seed, population.size()}));
  return 0;
}

int cmd_gen_pop(const GenArgs& a) {
  PopulationTargets t;
  t.n = a.n;
  if (!a.targets.empty()) {
    t.hba1c_mean = a.targets[0];
    t.hba1c_sd = a.targets[1];
    t.fbg_mean = a.targets[2];
    t.fbg_sd = a.targets[3];
  }
  const auto pop = generate_population(t, a.seed);
  save_population(pop, a.out);
  std::cerr << fmt::format("wrote {} avatars to {}\n", pop.size(), a.out);
  return 0;
}

int cmd_metrics(const std::string& dir, const std::string& out) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("traces_", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path());
  }
  if (files.empty()) throw std::runtime_error(fmt::format("{}: no traces_*.csv files", dir));
  std::sort(files.begin(), files.end());
  for (const auto& traces : files) {
    const auto id = traces.stem().string().substr(7);
    const auto report = recompute_metrics(fs::path(dir) / fmt::format("avatar_{}.csv", id), traces);
    auto windows = nlohmann::ordered_json::array();
    for (const auto& w : report.windows) {
      windows.push_back({{"start_day", w.start_day},
                         {"tir", w.tir},
                         {"tbr", w.tbr},
                         {"gmi", w.gmi},
                         {"mean_cgm", w.mean_cgm},
                         {"mean_fbg", w.mean_fbg},
                         {"level2_count", w.level2_count},
                         {"total_insulin", w.total_insulin},
                         {"final_dose", w.final_dose}});
    }
    j[id] = std::move(windows);
  }
  const auto text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!(f << text)) throw std::runtime_error(fmt::format("cannot write {}", out));
  }
  return 0;
}

int cmd_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(fmt::format("cannot open {}", path));
  std::cout << format_report(nlohmann::ordered_json::parse(f));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Basal insulin titration experiments"};
  app.require_subcommand(1);

  RunArgs run;
  auto* r = app.add_subcommand("run", "simulate scenarios over a population");
  r->add_option("--scenario", run.scenarios, "scenario name or 'all' (repeatable)")->delimiter(',');
  r->add_option("--population", run.population, "population file from gen-pop")->check(CLI::ExistingFile);
  r->add_option("--seed", run.seed, "master seed");
  r->add_option("--weeks", run.weeks, "override duration")->check(CLI::Range(2, 520));
  r->add_option("--n", run.n, "population size when generating");
  r->add_option("--out", run.out, "output directory");
  r->add_option("--config", run.config, "INI configuration")->check(CLI::ExistingFile);
  r->add_flag("--dump-traces", run.dump_traces, "write CGM traces");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-pop", "generate a synthetic population");
  g->add_option("--n", gen.n, "number of avatars")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "seed");
  g->add_option("--targets", gen.targets, "hba1c_mean,hba1c_sd,fbg_mean,fbg_sd")
      ->delimiter(',')
      ->expected(4);
  g->add_option("--out", gen.out, "output file");

  std::string metrics_dir, metrics_out;
  auto* m = app.add_subcommand("metrics", "recompute 14-day metrics from dumped traces");
  m->add_option("dir", metrics_dir, "scenario output directory")->required()->check(CLI::ExistingDirectory);
  m->add_option("--out", metrics_out, "write JSON here instead of stdout");

  std::string summary = "out/summary.json";
  auto* rep = app.add_subcommand("report", "print checkpoint tables from a summary");
  rep->add_option("summary", summary, "summary.json")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*r) return cmd_run(run);
    if (*g) return cmd_gen_pop(gen);
    if (*m) return cmd_metrics(metrics_dir, metrics_out);
    if (*rep) return cmd_report(summary);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
