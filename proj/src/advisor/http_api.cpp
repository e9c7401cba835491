#include "titration/advisor/http_api.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include <fmt/format.h>
#include <httplib.h>

namespace titration::advisor {

namespace {

constexpr std::size_t kDefaultLimit = 100;
constexpr std::size_t kMaxLimit = 1000;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int status_of(ServiceError::Kind kind) {
  switch (kind) {
    case ServiceError::Kind::NotFound: return 404;
    case ServiceError::Kind::Conflict: return 409;
    case ServiceError::Kind::Invalid: break;
  }
  return 400;
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error&) {
    throw ServiceError(ServiceError::Kind::Invalid, "request body is not valid JSON");
  }
}

Minutes time_field(const json& body) {
  const auto it = body.find("time");
  if (it == body.end() || !it->is_number_integer()) {
    throw ServiceError(ServiceError::Kind::Invalid, "'time' must be an integer (minutes)");
  }
  return it->get<Minutes>();
}

double number_field(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_number()) {
    throw ServiceError(ServiceError::Kind::Invalid, fmt::format("'{}' must be a number", key));
  }
  return it->get<double>();
}

double query_number(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) {
    throw ServiceError(ServiceError::Kind::Invalid, fmt::format("query parameter '{}' is required", key));
  }
  const auto text = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ServiceError(ServiceError::Kind::Invalid, fmt::format("'{}' is not a number", key));
  }
}

std::size_t query_count(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const double v = query_number(req, key);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw ServiceError(ServiceError::Kind::Invalid, fmt::format("'{}' must be a non-negative integer", key));
  }
  return static_cast<std::size_t>(v);
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

}  // namespace

void register_routes(httplib::Server& server, AdvisorService& service, HttpOptions options) {
  if (!options.log) options.log = [](const std::string& line) { std::cerr << line << '\n'; };
  const auto opts = std::make_shared<HttpOptions>(std::move(options));

  // Wraps a handler with token check, error mapping and request logging.
  auto wrap = [opts](Handler inner) -> Handler {
    return [opts, inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
      const auto started = std::chrono::steady_clock::now();
      try {
        if (!opts->token.empty() &&
            req.get_header_value("Authorization") != "Bearer " + opts->token) {
          reply(res, 401, {{"error", "missing or invalid token"}});
        } else {
          inner(req, res);
        }
      } catch (const ServiceError& e) {
        reply(res, status_of(e.kind()), {{"error", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
      }
      const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started);
      opts->log(json{{"method", req.method},
                     {"path", req.path},
                     {"status", res.status},
                     {"ms", std::round(ms.count() * 1000.0) / 1000.0}}
                    .dump());
    };
  };

  server.Post("/v1/patients", wrap([&service](const auto& req, auto& res) {
    const auto id = service.create_patient(parse_body(req));
    reply(res, 201, {{"id", id}});
  }));
  server.Get(R"(/v1/patients/([^/]+))", wrap([&service](const auto& req, auto& res) {
    reply(res, 200, service.get_patient(req.matches[1]));
  }));
  server.Post(R"(/v1/patients/([^/]+)/fbg)", wrap([&service](const auto& req, auto& res) {
    const auto body = parse_body(req);
    reply(res, 200, service.log_fbg(req.matches[1], number_field(body, "value"), time_field(body)));
  }));
  server.Post(R"(/v1/patients/([^/]+)/doses)", wrap([&service](const auto& req, auto& res) {
    const auto body = parse_body(req);
    reply(res, 200, service.log_dose(req.matches[1], number_field(body, "units"), time_field(body)));
  }));
  server.Get(R"(/v1/patients/([^/]+)/recommendation)", wrap([&service](const auto& req, auto& res) {
    reply(res, 200, service.get_recommendation(req.matches[1]));
  }));
  server.Get(R"(/v1/patients/([^/]+)/whatif)", wrap([&service](const auto& req, auto& res) {
    reply(res, 200, service.what_if(req.matches[1], query_number(req, "dose")));
  }));
  server.Get(R"(/v1/patients/([^/]+)/history)", wrap([&service](const auto& req, auto& res) {
    const auto offset = query_count(req, "offset", 0);
    const auto limit = std::min(query_count(req, "limit", kDefaultLimit), kMaxLimit);
    reply(res, 200, service.get_history(req.matches[1], offset, limit));
  }));

  if (!opts->static_dir.empty()) server.set_mount_point("/", opts->static_dir.string());
}

}  // namespace titration::advisor
