#pragma once

// Event-sourced patient records and the recommendation engine behind the
// advisor HTTP API.
//
// Every mutation is appended to the event store before it is applied, and the
// in-memory state is a pure function of the event sequence: replaying the log
// rebuilds identical estimates and recommendations. Times are integer minutes
// on a per-patient clock chosen by the client.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "titration/advisor/event_store.hpp"
#include "titration/controllers.hpp"
#include "titration/estimator.hpp"

namespace titration::advisor {

using json = nlohmann::ordered_json;

class ServiceError : public std::runtime_error {
 public:
  enum class Kind { Invalid, NotFound, Conflict };
  ServiceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct PatientProfile {
  std::string id;
  double body_weight = 0.0;
  std::string drug = "degludec";
  TitrationConfig config;
  PriorSpec prior;

  json to_json() const;
};

// Missing fields take the given defaults, except body_weight which is required.
PatientProfile parse_profile(const json& body, const TitrationConfig& default_config,
                             const PriorSpec& default_prior);

struct PatientEvent {
  enum class Kind { Fbg, Dose };
  Kind kind = Kind::Fbg;
  Minutes time = 0;
  double value = 0.0;  // mg/dL or U
};

struct PatientRecord {
  PatientProfile profile;
  DrugParams drug;
  std::vector<PatientEvent> events;
  ObservationLog log;
  ModelParams estimate;                        // prior mean until the first reading
  std::vector<ModelParams> estimate_history;  // after each reading, in order
};

// Decision state derived from a record: when the next dose is due, what is in
// use, and which doses precede it.
struct DecisionState {
  Minutes now = 0;
  double u_prev = 0.0;
  std::vector<DoseEvent> history;
};

DecisionState decision_state(const PatientRecord& record);

struct ServiceOptions {
  TitrationConfig default_config;
  PriorSpec default_prior;
};

class AdvisorService {
 public:
  // In-memory only.
  explicit AdvisorService(ServiceOptions options = {});
  // Persists to <data_dir>/events.jsonl, replaying it first.
  AdvisorService(const std::filesystem::path& data_dir, ServiceOptions options = {});

  std::string create_patient(const json& profile);
  json get_patient(const std::string& id) const;
  json log_fbg(const std::string& id, double reading, Minutes time);
  json log_dose(const std::string& id, double units, Minutes time);
  json get_recommendation(const std::string& id) const;
  json what_if(const std::string& id, double dose) const;
  json get_history(const std::string& id, std::size_t offset, std::size_t limit) const;

  std::size_t patient_count() const;
  // Copy of a record, for tests and tooling.
  PatientRecord record(const std::string& id) const;

 private:
  struct Slot {
    mutable std::shared_mutex mutex;
    PatientRecord record;
  };

  void apply(const json& event);
  std::shared_ptr<Slot> find(const std::string& id) const;
  void persist(const json& event);

  ServiceOptions options_;
  std::unique_ptr<EventStore> store_;
  mutable std::shared_mutex patients_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> patients_;
  std::uint64_t next_id_ = 1;
};

json params_json(const ModelParams& p);
json recommendation_json(const DoseRecommendation& rec, const ModelParams& params,
                         const DecisionState& state, std::optional<double> soc_delta_u);

}  // namespace titration::advisor
