#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "titration/advisor/http_api.hpp"
#include "titration/advisor/service.hpp"

using namespace titration;
using namespace titration::advisor;
namespace fs = std::filesystem;

namespace {

constexpr Minutes kDay = kMinutesPerDay;

ServiceError::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.kind();
  }
  FAIL("expected a ServiceError");
  return ServiceError::Kind::Invalid;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Two weeks of daily doses at 21:00 and readings at 07:00.
void feed(AdvisorService& s, const std::string& id, double dose, int days, double fbg0) {
  for (int d = 0; d < days; ++d) {
    s.log_fbg(id, fbg0 - 2.0 * d, d * kDay + 420);
    s.log_dose(id, dose, d * kDay + 1260);
  }
}

}  // namespace

TEST_CASE("profile validation") {
  AdvisorService s;
  CHECK(kind_of([&] { s.create_patient({{"drug", "degludec"}}); }) == ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.create_patient({{"body_weight", -3}}); }) == ServiceError::Kind::Invalid);
  CHECK(kind_of([&] {
          s.create_patient({{"body_weight", 80}, {"config", {{"fbg_low", 95}, {"fbg_high", 90}}}});
        }) == ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.create_patient({{"body_weight", 80}, {"drug", "nph"}}); }) ==
        ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.create_patient({{"body_weight", 80}, {"colour", "red"}}); }) ==
        ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.create_patient({{"body_weight", 80}, {"prior", {{"p1", "x"}}}}); }) ==
        ServiceError::Kind::Invalid);
  CHECK(s.patient_count() == 0);

  CHECK(s.create_patient({{"body_weight", 80}}) == "p1");
  CHECK(s.create_patient({{"id", "alice"}, {"body_weight", 60}, {"drug", "glargine-300"}}) == "alice");
  CHECK(kind_of([&] { s.create_patient({{"id", "alice"}, {"body_weight", 60}}); }) ==
        ServiceError::Kind::Conflict);
  CHECK(s.get_patient("alice").at("drug") == "glargine-300");
  CHECK(kind_of([&] { s.get_patient("bob"); }) == ServiceError::Kind::NotFound);
}

TEST_CASE("event validation") {
  AdvisorService s;
  const auto id = s.create_patient({{"body_weight", 80}});
  CHECK(kind_of([&] { s.log_fbg(id, 0.0, 10); }) == ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.log_fbg(id, -5.0, 10); }) == ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.log_dose(id, -1.0, 10); }) == ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.log_fbg("nobody", 120.0, 10); }) == ServiceError::Kind::NotFound);
  s.log_fbg(id, 150.0, 420);
  CHECK(kind_of([&] { s.log_fbg(id, 150.0, 420); }) == ServiceError::Kind::Invalid);
  CHECK(kind_of([&] { s.log_dose(id, 10.0, 419); }) == ServiceError::Kind::Invalid);
  s.log_dose(id, 10.0, 420);
  CHECK(kind_of([&] { s.log_fbg(id, 150.0, 420); }) == ServiceError::Kind::Invalid);
  CHECK(s.record(id).events.size() == 2);
}

TEST_CASE("treatment-naive patient is started at +1 U") {
  AdvisorService s;
  const auto id = s.create_patient({{"body_weight", 80}});
  const auto rec = s.get_recommendation(id);
  CHECK(rec.at("delta_u") == 1.0);
  CHECK(rec.at("new_dose") == 1.0);
  CHECK(rec.at("u_prev") == 0.0);
  CHECK(rec.at("soc_delta_u").is_null());
  CHECK(rec.at("trajectory").size() == 11);
  for (const auto& pt : rec.at("trajectory")) {
    CHECK(pt.at("low").get<double>() < pt.at("fbg").get<double>());
    CHECK(pt.at("fbg").get<double>() < pt.at("high").get<double>());
  }
}

TEST_CASE("first reading moves the estimate away from the prior") {
  AdvisorService s;
  const auto id = s.create_patient({{"body_weight", 80}});
  const auto before = s.get_patient(id).at("estimate");
  const auto after = s.log_fbg(id, 220.0, 420).at("estimate");
  CHECK(after.at("p0").get<double>() > before.at("p0").get<double>());
  CHECK(s.get_recommendation(id).at("soc_delta_u") == 2.0);
}

TEST_CASE("patient at the cost minimum is left alone") {
  // With no insulin on board the prediction is p0, and p0 = FBG_L e^(alpha p2)
  // puts the lower envelope exactly on FBG_L: both cost terms vanish.
  AdvisorService s;
  const double p0 = 72.0 * std::exp(1.65 * 0.01);
  const auto id = s.create_patient(
      {{"body_weight", 80}, {"prior", {{"p0", p0}, {"p1", 0.0001}, {"p2", 0.01}}}});
  const auto rec = s.get_recommendation(id);
  CHECK(rec.at("delta_u") == 0.0);
  CHECK(rec.at("cost").at("total").get<double>() == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("what-if predictions") {
  AdvisorService s;
  const auto id = s.create_patient({{"body_weight", 80}});
  feed(s, id, 12.0, 10, 190.0);
  CHECK(kind_of([&] { s.what_if(id, -1.0); }) == ServiceError::Kind::Invalid);

  const auto lo = s.what_if(id, 10.0).at("trajectory");
  const auto hi = s.what_if(id, 30.0).at("trajectory");
  REQUIRE(lo.size() == hi.size());
  for (std::size_t d = 0; d < lo.size(); ++d) {
    CHECK(hi[d].at("fbg").get<double>() <= lo[d].at("fbg").get<double>());
  }

  const auto rec = s.get_recommendation(id);
  const auto same = s.what_if(id, rec.at("new_dose").get<double>()).at("trajectory");
  REQUIRE(same.size() == rec.at("trajectory").size());
  for (std::size_t d = 0; d < same.size(); ++d) {
    CHECK(same[d].at("fbg").get<double>() ==
          doctest::Approx(rec.at("trajectory")[d].at("fbg").get<double>()).epsilon(1e-12));
    CHECK(same[d].at("time") == rec.at("trajectory")[d].at("time"));
  }
}

TEST_CASE("history pagination") {
  AdvisorService s;
  const auto id = s.create_patient({{"body_weight", 80}});
  feed(s, id, 8.0, 5, 170.0);
  const auto all = s.get_history(id, 0, 100);
  CHECK(all.at("total") == 10);
  CHECK(all.at("events").size() == 10);
  CHECK(all.at("events")[0].at("type") == "fbg");
  CHECK(all.at("events")[0].contains("estimate"));
  CHECK(all.at("events")[1].at("type") == "dose");
  CHECK(all.at("events")[1].contains("recommended"));

  const auto page = s.get_history(id, 3, 4);
  CHECK(page.at("offset") == 3);
  REQUIRE(page.at("events").size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(page.at("events")[i] == all.at("events")[3 + i]);

  CHECK(s.get_history(id, 8, 100).at("events").size() == 2);
  CHECK(s.get_history(id, 50, 10).at("events").empty());
  CHECK(s.get_history(id, 50, 10).at("offset") == 10);

  // Estimates in history are the ones reported when each reading was logged.
  const auto rec = s.record(id);
  CHECK(all.at("events")[8].at("estimate") == params_json(rec.estimate_history[4]));
}

TEST_CASE("recommendations match the engine on the stored state") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> fbg(60.0, 260.0), dose(0.0, 60.0);
  AdvisorService s;
  for (int p = 0; p < 8; ++p) {
    const auto id = s.create_patient({{"body_weight", 55.0 + 5 * p}});
    Minutes t = 0;
    for (int e = 0; e < 12; ++e) {
      t += 300 + static_cast<Minutes>(rng() % 1500);
      if (rng() % 2) s.log_fbg(id, fbg(rng), t);
      else s.log_dose(id, std::round(dose(rng)), t);
      const auto r = s.record(id);
      const auto state = decision_state(r);
      const auto rec = rhc_recommend(r.estimate, r.profile.prior, r.profile.config, state.history,
                                     state.u_prev, state.now, r.drug, Subject{r.profile.body_weight});
      const auto got = s.get_recommendation(id);
      CHECK(got.at("delta_u").get<double>() == rec.delta_u);
      CHECK(got.at("new_dose").get<double>() == rec.new_dose);
      CHECK(got.at("decision_time").get<Minutes>() == state.now);
      // Estimate is a cold start on the full log.
      if (!r.log.readings().empty()) {
        CHECK(r.estimate ==
              map_estimate(r.log, r.profile.prior, r.drug, Subject{r.profile.body_weight}).params);
      }
    }
  }
}

TEST_CASE("decision state") {
  PatientRecord r;
  CHECK(decision_state(r).now == 0);
  r.events = {{PatientEvent::Kind::Dose, 100, 5}};
  CHECK(decision_state(r).now == 100 + kDay);
  CHECK(decision_state(r).u_prev == 5);
  CHECK(decision_state(r).history.size() == 1);
  r.events.push_back({PatientEvent::Kind::Fbg, 500, 140});
  CHECK(decision_state(r).now == 500);
  r.events.push_back({PatientEvent::Kind::Dose, 500, 7});
  CHECK(decision_state(r).now == 500 + kDay);
  CHECK(decision_state(r).u_prev == 7);
  CHECK(decision_state(r).history.size() == 2);
}

TEST_CASE("persisted state replays exactly and reads do not write") {
  const auto dir = fresh_dir("titration_advisor_replay");
  std::vector<std::string> ids;
  nlohmann::ordered_json recs, hist;
  {
    AdvisorService s(dir);
    for (int p = 0; p < 3; ++p) {
      ids.push_back(s.create_patient({{"body_weight", 70 + 10 * p}}));
      feed(s, ids.back(), 6.0 + p, 6, 200.0 - 10 * p);
    }
    const auto before = slurp(dir / "events.jsonl");
    for (const auto& id : ids) {
      recs[id] = s.get_recommendation(id);
      hist[id] = s.get_history(id, 0, 1000);
      s.get_patient(id);
      s.what_if(id, 20.0);
    }
    CHECK(slurp(dir / "events.jsonl") == before);
  }
  AdvisorService again(dir);
  CHECK(again.patient_count() == 3);
  for (const auto& id : ids) {
    CHECK(again.get_recommendation(id) == recs[id]);
    CHECK(again.get_history(id, 0, 1000) == hist[id]);
  }
  // New ids continue past the replayed ones.
  CHECK(again.create_patient({{"body_weight", 90}}) == "p4");
  fs::remove_all(dir);
}

TEST_CASE("a torn final line is dropped on reopen") {
  const auto dir = fresh_dir("titration_advisor_torn");
  std::string id;
  {
    AdvisorService s(dir);
    id = s.create_patient({{"body_weight", 80}});
    s.log_fbg(id, 180.0, 420);
  }
  { std::ofstream(dir / "events.jsonl", std::ios::app) << R"({"type":"fbg","pat)"; }
  {
    AdvisorService s(dir);
    CHECK(s.record(id).events.size() == 1);
    s.log_fbg(id, 170.0, 420 + kDay);
  }
  AdvisorService s(dir);
  CHECK(s.record(id).events.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("a corrupt line in the middle is reported") {
  const auto dir = fresh_dir("titration_advisor_corrupt");
  {
    std::ofstream f(dir / "events.jsonl");
    f << "{not json}\n" << R"({"type":"create_patient","profile":{"body_weight":80}})" << "\n";
  }
  try {
    AdvisorService s(dir);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("events.jsonl:1") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("HTTP round trip") {
  AdvisorService service;
  httplib::Server server;
  std::vector<std::string> log;
  std::mutex log_mutex;
  register_routes(server, service,
                  {"secret", {}, [&](const std::string& line) {
                     std::lock_guard lock(log_mutex);
                     log.push_back(line);
                   }});
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  const httplib::Headers auth{{"Authorization", "Bearer secret"}};

  auto res = cli.Post("/v1/patients", R"({"body_weight": 82})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 401);

  res = cli.Post("/v1/patients", auth, R"({"body_weight": 82})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto id = nlohmann::json::parse(res->body).at("id").get<std::string>();

  res = cli.Post("/v1/patients", auth, R"({"body_weight": "heavy"})", "application/json");
  CHECK(res->status == 400);
  res = cli.Post("/v1/patients", auth, "{", "application/json");
  CHECK(res->status == 400);
  res = cli.Post("/v1/patients", auth, R"({"id": ")" + id + R"(", "body_weight": 82})",
                 "application/json");
  CHECK(res->status == 409);

  res = cli.Post(("/v1/patients/" + id + "/fbg").c_str(), auth, R"({"time": 420, "value": 210})",
                 "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body).contains("estimate"));
  res = cli.Post(("/v1/patients/" + id + "/fbg").c_str(), auth, R"({"time": 420.5, "value": 210})",
                 "application/json");
  CHECK(res->status == 400);
  res = cli.Post(("/v1/patients/" + id + "/doses").c_str(), auth, R"({"time": 1260, "units": 10})",
                 "application/json");
  CHECK(res->status == 200);

  res = cli.Get(("/v1/patients/" + id + "/recommendation").c_str(), auth);
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto rec = nlohmann::json::parse(res->body);
  CHECK(rec.at("new_dose") == service.get_recommendation(id).at("new_dose"));

  res = cli.Get(("/v1/patients/" + id + "/whatif?dose=15").c_str(), auth);
  CHECK(res->status == 200);
  res = cli.Get(("/v1/patients/" + id + "/whatif?dose=-2").c_str(), auth);
  CHECK(res->status == 400);
  res = cli.Get(("/v1/patients/" + id + "/whatif").c_str(), auth);
  CHECK(res->status == 400);
  res = cli.Get(("/v1/patients/" + id + "/history?offset=1&limit=1").c_str(), auth);
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body).at("events").size() == 1);
  res = cli.Get("/v1/patients/ghost", auth);
  CHECK(res->status == 404);
  CHECK(nlohmann::json::parse(res->body).contains("error"));

  server.stop();
  thread.join();
  std::lock_guard lock(log_mutex);
  REQUIRE_FALSE(log.empty());
  const auto first = nlohmann::json::parse(log.front());
  CHECK(first.at("status") == 401);
  CHECK(first.contains("ms"));
}
