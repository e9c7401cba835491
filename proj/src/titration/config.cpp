#include "titration/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace titration {

namespace pt = boost::property_tree;

namespace {

class Section {
 public:
  Section(const pt::ptree& tree, std::string name, const std::filesystem::path& file)
      : tree_(tree), name_(std::move(name)), file_(file) {}

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const auto child = tree_.get_child_optional(key);
    if (!child) return;
    const auto value = child->get_value_optional<T>();
    if (!value) fail(key, fmt::format("cannot parse '{}'", child->data()));
    out = *value;
  }

  void finish() const {
    for (const auto& [key, _] : tree_) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw std::runtime_error(fmt::format("{}: [{}] {}: {}", file_.string(), name_, key, what));
  }

 private:
  const pt::ptree& tree_;
  std::string name_;
  const std::filesystem::path& file_;
  std::set<std::string> seen_;
};

std::vector<int> parse_intervals(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    out.push_back(v);
  }
  return out;
}

}  // namespace

const ScenarioSpec& HarnessConfig::scenario(const std::string& name) const {
  const auto it = std::find_if(scenarios.begin(), scenarios.end(),
                               [&](const ScenarioSpec& s) { return s.name == name; });
  if (it == scenarios.end()) throw std::invalid_argument(fmt::format("unknown scenario '{}'", name));
  return *it;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), e.message()));
  }

  HarnessConfig cfg;
  auto& c = cfg.run.config;
  auto& prior = cfg.run.prior;
  std::string drug_name = "degludec";
  std::string drug_file;

  for (const auto& [name, body] : tree) {
    Section s(body, name, path);
    if (name == "titration") {
      s.read("fbg_low", c.fbg_low);
      s.read("fbg_high", c.fbg_high);
      s.read("gamma", c.gamma);
      s.read("xi", c.xi);
      s.read("alpha", c.alpha);
      s.read("horizon_days", c.horizon_days);
      s.read("beta", c.beta);
      s.read("du_min", c.du_min);
      s.read("titration_interval", c.titration_interval);
      s.read("fbg_window", c.fbg_window);
    } else if (name == "prior") {
      s.read("p0", prior.mean.p0);
      s.read("p1", prior.mean.p1);
      s.read("p2", prior.mean.p2);
      s.read("eta0", prior.eta0);
      s.read("eta1", prior.eta1);
      s.read("eta2", prior.eta2);
    } else if (name == "drug") {
      s.read("name", drug_name);
      s.read("file", drug_file);
    } else if (name == "run") {
      s.read("start_dose", cfg.run.start_dose);
      s.read("miss_probability", cfg.miss_probability);
      s.read("weeks", cfg.weeks);
    } else if (name == "population") {
      s.read("n", cfg.population.n);
      s.read("hba1c_mean", cfg.population.hba1c_mean);
      s.read("hba1c_sd", cfg.population.hba1c_sd);
      s.read("fbg_mean", cfg.population.fbg_mean);
      s.read("fbg_sd", cfg.population.fbg_sd);
    } else if (name.rfind("scenario.", 0) == 0) {
      const std::string sname = name.substr(9);
      ScenarioSpec spec;
      auto it = std::find_if(cfg.scenarios.begin(), cfg.scenarios.end(),
                             [&](const ScenarioSpec& x) { return x.name == sname; });
      if (it != cfg.scenarios.end()) spec = *it;
      spec.name = sname;
      std::string policy = std::string(to_string(spec.policy));
      std::string intervals;
      s.read("policy", policy);
      s.read("fbg_window", spec.fbg_window);
      s.read("intervals", intervals);
      try {
        spec.policy = parse_policy(policy);
        if (!intervals.empty()) spec.interval_pattern = parse_intervals(intervals);
      } catch (const std::exception& e) {
        s.fail("policy/intervals", e.what());
      }
      if (it != cfg.scenarios.end()) {
        *it = spec;
      } else {
        cfg.scenarios.push_back(spec);
      }
    } else {
      throw std::runtime_error(fmt::format("{}: unknown section [{}]", path.string(), name));
    }
    s.finish();
  }

  if (!drug_file.empty()) {
    std::filesystem::path f(drug_file);
    if (f.is_relative()) f = path.parent_path() / f;
    const auto presets = load_drug_presets(f);
    const auto it = presets.find(drug_name);
    if (it == presets.end()) {
      throw std::runtime_error(fmt::format("{}: drug '{}' not found", f.string(), drug_name));
    }
    cfg.run.drug = it->second;
  } else {
    cfg.run.drug = drug_preset(drug_name);
  }

  for (auto& spec : cfg.scenarios) {
    spec.duration_weeks = cfg.weeks;
    spec.miss_probability = cfg.miss_probability;
  }

  try {
    c.validate();
    prior.validate();
    cfg.run.drug.validate();
    cfg.population.validate();
    if (cfg.run.start_dose < 0.0) throw std::invalid_argument("start_dose must be >= 0");
    for (const auto& spec : cfg.scenarios) spec.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), e.what()));
  }
  return cfg;
}

}  // namespace titration
