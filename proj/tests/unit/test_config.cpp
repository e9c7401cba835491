#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "titration/config.hpp"

using namespace titration;
namespace fs = std::filesystem;

namespace {

fs::path write_ini(const std::string& name, const std::string& text) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

std::string error_of(const fs::path& p) {
  try {
    load_config(p);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("shipped default configuration equals the built-in defaults") {
  const auto cfg = load_config(fs::path(TITRATION_SOURCE_DIR) / "config/default.ini");
  const HarnessConfig defaults;
  CHECK(cfg.run.config == defaults.run.config);
  CHECK(cfg.run.prior == defaults.run.prior);
  CHECK(cfg.run.drug.name == "degludec");
  CHECK(cfg.run.start_dose == 0.0);
  CHECK(cfg.weeks == 52);
  CHECK(cfg.population.n == 427);
  REQUIRE(cfg.scenarios.size() == 5);
  CHECK(cfg.scenario("RHC-1-acc").interval_pattern == std::vector<int>{1});
}

TEST_CASE("overrides and extra scenarios") {
  const auto p = write_ini("titration_cfg_ok.ini",
                           "[titration]\nfbg_low = 80\nfbg_high = 110\ngamma = 100\n"
                           "[prior]\np0 = 170\n"
                           "[drug]\nname = glargine-300\n"
                           "[run]\nweeks = 10\nstart_dose = 4\n"
                           "[scenario.RHC-2]\npolicy = rhc\nfbg_window = 2\nintervals = 2, 5\n"
                           "[scenario.SoC-3]\nfbg_window = 4\n");
  const auto cfg = load_config(p);
  CHECK(cfg.run.config.fbg_low == 80);
  CHECK(cfg.run.config.fbg_high == 110);
  CHECK(cfg.run.config.gamma == 100);
  CHECK(cfg.run.config.xi == 100);
  CHECK(cfg.run.prior.mean.p0 == 170);
  CHECK(cfg.run.drug.k1 == 0.00057);
  CHECK(cfg.run.start_dose == 4);
  REQUIRE(cfg.scenarios.size() == 6);
  const auto& extra = cfg.scenario("RHC-2");
  CHECK(extra.policy == PolicyKind::Rhc);
  CHECK(extra.fbg_window == 2);
  CHECK(extra.interval_pattern == std::vector<int>{2, 5});
  CHECK(extra.duration_weeks == 10);
  CHECK(cfg.scenario("SoC-3").fbg_window == 4);
  CHECK(cfg.scenario("SoC-3").policy == PolicyKind::Soc);
  CHECK_THROWS(cfg.scenario("nope"));
  fs::remove(p);
}

TEST_CASE("drug file lookup") {
  const auto p = write_ini("titration_cfg_drug.ini",
                           "[drug]\nname = degludec\nfile = " TITRATION_SOURCE_DIR "/data/drugs.ini\n");
  CHECK(load_config(p).run.drug.k2 == 0.0024);
  fs::remove(p);
}

TEST_CASE("configuration errors name file and key") {
  auto p = write_ini("titration_cfg_bad1.ini", "[titration]\nfbg_lo = 70\n");
  auto msg = error_of(p);
  CHECK(msg.find("fbg_lo") != std::string::npos);
  CHECK(msg.find(p.string()) != std::string::npos);

  p = write_ini("titration_cfg_bad2.ini", "[titration]\ngamma = lots\n");
  CHECK(error_of(p).find("gamma") != std::string::npos);

  p = write_ini("titration_cfg_bad3.ini", "[titration]\nfbg_low = 95\n");
  CHECK(error_of(p).find("FBG_L") != std::string::npos);

  p = write_ini("titration_cfg_bad4.ini", "[extras]\nx = 1\n");
  CHECK(error_of(p).find("extras") != std::string::npos);

  p = write_ini("titration_cfg_bad5.ini", "[drug]\nname = nph\n");
  CHECK_FALSE(error_of(p).empty());

  p = write_ini("titration_cfg_bad6.ini", "[scenario.X]\npolicy = pid\n");
  CHECK(error_of(p).find("pid") != std::string::npos);

  CHECK_FALSE(error_of(fs::temp_directory_path() / "titration_cfg_missing.ini").empty());
}
