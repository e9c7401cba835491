#pragma once

// Harness configuration file (INI). See config/default.ini for every key.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "titration/avatar.hpp"
#include "titration/scenario.hpp"

namespace titration {

struct HarnessConfig {
  RunSettings run;
  PopulationTargets population;
  int weeks = 52;
  double miss_probability = 0.0;
  // Presets, possibly overridden by [scenario.NAME] sections, in file order
  // after the five canonical ones.
  std::vector<ScenarioSpec> scenarios = canonical_scenarios();

  const ScenarioSpec& scenario(const std::string& name) const;
};

// Throws std::runtime_error naming the file and key on unknown sections, unknown
// keys or malformed values.
HarnessConfig load_config(const std::filesystem::path& path);

}  // namespace titration
