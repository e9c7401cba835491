#include "titration/advisor/service.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include <fmt/format.h>

namespace titration::advisor {

namespace {

using Kind = ServiceError::Kind;

[[noreturn]] void invalid(const std::string& what) { throw ServiceError(Kind::Invalid, what); }

double number(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) invalid(fmt::format("'{}' must be a number", key));
  const double v = it->get<double>();
  if (!std::isfinite(v)) invalid(fmt::format("'{}' must be finite", key));
  return v;
}

template <typename T>
void optional_field(const json& obj, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) invalid(fmt::format("'{}' must be a string", key));
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) invalid(fmt::format("'{}' must be an integer", key));
  } else {
    if (!it->is_number()) invalid(fmt::format("'{}' must be a number", key));
  }
  out = it->get<T>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const char* where) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) invalid(fmt::format("unknown field '{}' in {}", k, where));
  }
}

json config_json(const TitrationConfig& c) {
  return {{"fbg_low", c.fbg_low},         {"fbg_high", c.fbg_high},
          {"gamma", c.gamma},             {"xi", c.xi},
          {"alpha", c.alpha},             {"horizon_days", c.horizon_days},
          {"beta", c.beta},               {"du_min", c.du_min},
          {"titration_interval", c.titration_interval}, {"fbg_window", c.fbg_window}};
}

json prior_json(const PriorSpec& p) {
  return {{"p0", p.mean.p0}, {"p1", p.mean.p1}, {"p2", p.mean.p2},
          {"eta0", p.eta0},  {"eta1", p.eta1},  {"eta2", p.eta2}};
}

const char* kind_name(PatientEvent::Kind k) { return k == PatientEvent::Kind::Fbg ? "fbg" : "dose"; }

DecisionState decision_state(std::span<const PatientEvent> events) {
  DecisionState s;
  const PatientEvent* last_fbg = nullptr;
  const PatientEvent* last_dose = nullptr;
  for (const auto& e : events) (e.kind == PatientEvent::Kind::Fbg ? last_fbg : last_dose) = &e;
  if (last_dose) s.u_prev = last_dose->value;
  if (last_fbg && (!last_dose || last_fbg->time > last_dose->time)) {
    s.now = last_fbg->time;
  } else if (last_dose) {
    s.now = last_dose->time + kMinutesPerDay;
  }
  for (const auto& e : events) {
    if (e.kind == PatientEvent::Kind::Dose && e.time < s.now) s.history.push_back({e.time, e.value});
  }
  return s;
}

std::optional<double> soc_answer(std::span<const PatientEvent> events, Minutes now,
                                 const TitrationConfig& config) {
  std::vector<double> readings;
  const Minutes since = now - static_cast<Minutes>(config.fbg_window) * kMinutesPerDay;
  for (const auto& e : events) {
    if (e.kind == PatientEvent::Kind::Fbg && e.time > since && e.time <= now) {
      readings.push_back(e.value);
    }
  }
  if (readings.empty()) return std::nullopt;
  return soc_recommend(readings, config);
}

json trajectory_json(const std::vector<double>& y, double p2, double alpha, Minutes now) {
  json out = json::array();
  for (std::size_t d = 0; d < y.size(); ++d) {
    const auto env = envelope(y[d], p2, alpha);
    out.push_back({{"time", now + static_cast<Minutes>(d + 1) * kMinutesPerDay},
                   {"fbg", y[d]},
                   {"low", env.low},
                   {"high", env.high}});
  }
  return out;
}

}  // namespace

json PatientProfile::to_json() const {
  return {{"id", id},
          {"body_weight", body_weight},
          {"drug", drug},
          {"config", config_json(config)},
          {"prior", prior_json(prior)}};
}

PatientProfile parse_profile(const json& body, const TitrationConfig& default_config,
                             const PriorSpec& default_prior) {
  if (!body.is_object()) invalid("profile must be a JSON object");
  reject_unknown(body, {"id", "body_weight", "drug", "config", "prior"}, "profile");
  PatientProfile p;
  p.config = default_config;
  p.prior = default_prior;
  optional_field(body, "id", p.id);
  if (!body.contains("body_weight")) invalid("'body_weight' is required");
  p.body_weight = number(body, "body_weight");
  optional_field(body, "drug", p.drug);
  if (const auto it = body.find("config"); it != body.end()) {
    if (!it->is_object()) invalid("'config' must be an object");
    reject_unknown(*it, {"fbg_low", "fbg_high", "gamma", "xi", "alpha", "horizon_days", "beta",
                         "du_min", "titration_interval", "fbg_window"},
                   "config");
    auto& c = p.config;
    optional_field(*it, "fbg_low", c.fbg_low);
    optional_field(*it, "fbg_high", c.fbg_high);
    optional_field(*it, "gamma", c.gamma);
    optional_field(*it, "xi", c.xi);
    optional_field(*it, "alpha", c.alpha);
    optional_field(*it, "horizon_days", c.horizon_days);
    optional_field(*it, "beta", c.beta);
    optional_field(*it, "du_min", c.du_min);
    optional_field(*it, "titration_interval", c.titration_interval);
    optional_field(*it, "fbg_window", c.fbg_window);
  }
  if (const auto it = body.find("prior"); it != body.end()) {
    if (!it->is_object()) invalid("'prior' must be an object");
    reject_unknown(*it, {"p0", "p1", "p2", "eta0", "eta1", "eta2"}, "prior");
    optional_field(*it, "p0", p.prior.mean.p0);
    optional_field(*it, "p1", p.prior.mean.p1);
    optional_field(*it, "p2", p.prior.mean.p2);
    optional_field(*it, "eta0", p.prior.eta0);
    optional_field(*it, "eta1", p.prior.eta1);
    optional_field(*it, "eta2", p.prior.eta2);
  }
  try {
    Subject{p.body_weight}.validate();
    p.config.validate();
    p.prior.validate();
    drug_preset(p.drug);
  } catch (const std::invalid_argument& e) {
    invalid(e.what());
  }
  return p;
}

DecisionState decision_state(const PatientRecord& record) { return decision_state(record.events); }

json params_json(const ModelParams& p) { return {{"p0", p.p0}, {"p1", p.p1}, {"p2", p.p2}}; }

json recommendation_json(const DoseRecommendation& rec, const ModelParams& params,
                         const DecisionState& state, std::optional<double> soc_delta_u) {
  return {{"decision_time", state.now},
          {"u_prev", state.u_prev},
          {"delta_u", rec.delta_u},
          {"new_dose", rec.new_dose},
          {"bound", rec.bound},
          {"bound_active", rec.bound_active},
          {"estimate", params_json(params)},
          {"cost",
           {{"q_hypo", rec.cost.q_hypo},
            {"q_hyper", rec.cost.q_hyper},
            {"regularization", rec.cost.regularization},
            {"total", rec.cost.total}}},
          {"trajectory", [&] {
             json out = json::array();
             for (std::size_t d = 0; d < rec.trajectory.size(); ++d) {
               out.push_back({{"time", state.now + static_cast<Minutes>(d + 1) * kMinutesPerDay},
                              {"fbg", rec.trajectory[d]},
                              {"low", rec.envelope_low[d]},
                              {"high", rec.envelope_high[d]}});
             }
             return out;
           }()},
          {"soc_delta_u", soc_delta_u ? json(*soc_delta_u) : json(nullptr)}};
}

AdvisorService::AdvisorService(ServiceOptions options) : options_(std::move(options)) {}

AdvisorService::AdvisorService(const std::filesystem::path& data_dir, ServiceOptions options)
    : options_(std::move(options)),
      store_(std::make_unique<EventStore>(data_dir / "events.jsonl")) {
  for (const auto& event : store_->replay()) apply(event);
}

void AdvisorService::persist(const json& event) {
  if (store_) store_->append(event);
}

std::shared_ptr<AdvisorService::Slot> AdvisorService::find(const std::string& id) const {
  std::shared_lock lock(patients_mutex_);
  const auto it = patients_.find(id);
  if (it == patients_.end()) throw ServiceError(Kind::NotFound, fmt::format("unknown patient '{}'", id));
  return it->second;
}

// Applies an already-validated event. Also used for replay.
void AdvisorService::apply(const json& event) {
  const auto type = event.at("type").get<std::string>();
  if (type == "create_patient") {
    auto slot = std::make_shared<Slot>();
    auto& r = slot->record;
    r.profile = parse_profile(event.at("profile"), options_.default_config, options_.default_prior);
    r.drug = drug_preset(r.profile.drug);
    r.estimate = r.profile.prior.mean;
    std::unique_lock lock(patients_mutex_);
    patients_[r.profile.id] = std::move(slot);
    return;
  }
  auto slot = find(event.at("patient").get<std::string>());
  auto& r = slot->record;
  const Minutes time = event.at("time").get<Minutes>();
  const double value = event.at("value").get<double>();
  if (type == "fbg") {
    r.events.push_back({PatientEvent::Kind::Fbg, time, value});
    r.log.add_reading(time, value);
    r.estimate = map_estimate(r.log, r.profile.prior, r.drug, Subject{r.profile.body_weight}).params;
    r.estimate_history.push_back(r.estimate);
  } else if (type == "dose") {
    r.events.push_back({PatientEvent::Kind::Dose, time, value});
    r.log.add_dose({time, value});
  } else {
    throw std::runtime_error(fmt::format("unknown event type '{}'", type));
  }
}

std::string AdvisorService::create_patient(const json& body) {
  auto profile = parse_profile(body, options_.default_config, options_.default_prior);
  std::unique_lock lock(patients_mutex_);
  if (profile.id.empty()) {
    do {
      profile.id = fmt::format("p{}", next_id_++);
    } while (patients_.count(profile.id));
  } else if (patients_.count(profile.id)) {
    throw ServiceError(Kind::Conflict, fmt::format("patient '{}' already exists", profile.id));
  }
  const json event{{"type", "create_patient"}, {"profile", profile.to_json()}};
  persist(event);
  auto slot = std::make_shared<Slot>();
  slot->record.profile = profile;
  slot->record.drug = drug_preset(profile.drug);
  slot->record.estimate = profile.prior.mean;
  patients_[profile.id] = std::move(slot);
  return profile.id;
}

json AdvisorService::get_patient(const std::string& id) const {
  const auto slot = find(id);
  std::shared_lock lock(slot->mutex);
  const auto& r = slot->record;
  json out = r.profile.to_json();
  out["estimate"] = params_json(r.estimate);
  out["readings"] = r.log.readings().size();
  out["doses"] = r.log.doses().size();
  return out;
}

json AdvisorService::log_fbg(const std::string& id, double reading, Minutes time) {
  if (!(reading > 0.0) || !std::isfinite(reading)) invalid("reading must be a positive number");
  const auto slot = find(id);
  std::unique_lock lock(slot->mutex);
  const auto& events = slot->record.events;
  if (!events.empty() && time <= events.back().time) {
    invalid(fmt::format("timestamp {} is not after the last event ({})", time, events.back().time));
  }
  const json event{{"type", "fbg"}, {"patient", id}, {"time", time}, {"value", reading}};
  persist(event);
  apply(event);
  return {{"estimate", params_json(slot->record.estimate)}};
}

json AdvisorService::log_dose(const std::string& id, double units, Minutes time) {
  if (!(units >= 0.0) || !std::isfinite(units)) invalid("dose must be a non-negative number");
  const auto slot = find(id);
  std::unique_lock lock(slot->mutex);
  const auto& events = slot->record.events;
  if (!events.empty() && time < events.back().time) {
    invalid(fmt::format("timestamp {} is before the last event ({})", time, events.back().time));
  }
  const json event{{"type", "dose"}, {"patient", id}, {"time", time}, {"value", units}};
  persist(event);
  apply(event);
  return {{"doses", slot->record.log.doses().size()}};
}

json AdvisorService::get_recommendation(const std::string& id) const {
  const auto slot = find(id);
  std::shared_lock lock(slot->mutex);
  const auto& r = slot->record;
  const auto state = decision_state(r);
  const auto rec = rhc_recommend(r.estimate, r.profile.prior, r.profile.config, state.history,
                                 state.u_prev, state.now, r.drug, Subject{r.profile.body_weight});
  return recommendation_json(rec, r.estimate, state, soc_answer(r.events, state.now, r.profile.config));
}

json AdvisorService::what_if(const std::string& id, double dose) const {
  if (!(dose >= 0.0) || !std::isfinite(dose)) invalid("dose must be a non-negative number");
  const auto slot = find(id);
  std::shared_lock lock(slot->mutex);
  const auto& r = slot->record;
  const auto state = decision_state(r);
  const auto y = predict_trajectory(r.estimate, state.history, dose, r.profile.config.horizon_days,
                                    state.now, r.drug, Subject{r.profile.body_weight});
  return {{"decision_time", state.now},
          {"dose", dose},
          {"estimate", params_json(r.estimate)},
          {"trajectory", trajectory_json(y, r.estimate.p2, r.profile.config.alpha, state.now)}};
}

json AdvisorService::get_history(const std::string& id, std::size_t offset, std::size_t limit) const {
  const auto slot = find(id);
  std::shared_lock lock(slot->mutex);
  const auto& r = slot->record;
  const std::size_t total = r.events.size();
  const std::size_t begin = std::min(offset, total);
  const std::size_t end = begin + std::min(limit, total - begin);

  std::size_t readings_before = 0;
  for (std::size_t i = 0; i < begin; ++i) readings_before += r.events[i].kind == PatientEvent::Kind::Fbg;

  json items = json::array();
  for (std::size_t i = begin; i < end; ++i) {
    const auto& e = r.events[i];
    json item{{"type", kind_name(e.kind)}, {"time", e.time}, {"value", e.value}};
    if (e.kind == PatientEvent::Kind::Fbg) {
      item["estimate"] = params_json(r.estimate_history[readings_before++]);
    } else {
      // What the engine would have advised just before this dose was logged.
      const std::span<const PatientEvent> before(r.events.data(), i);
      const auto state = decision_state(before);
      const auto& params =
          readings_before > 0 ? r.estimate_history[readings_before - 1] : r.profile.prior.mean;
      const auto rec = rhc_recommend(params, r.profile.prior, r.profile.config, state.history,
                                     state.u_prev, state.now, r.drug, Subject{r.profile.body_weight});
      item["recommended"] = {{"decision_time", state.now},
                             {"delta_u", rec.delta_u},
                             {"new_dose", rec.new_dose}};
    }
    items.push_back(std::move(item));
  }
  return {{"total", total}, {"offset", begin}, {"events", std::move(items)}};
}

std::size_t AdvisorService::patient_count() const {
  std::shared_lock lock(patients_mutex_);
  return patients_.size();
}

PatientRecord AdvisorService::record(const std::string& id) const {
  const auto slot = find(id);
  std::shared_lock lock(slot->mutex);
  return slot->record;
}

}  // namespace titration::advisor
