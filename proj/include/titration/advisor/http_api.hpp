#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "titration/advisor/service.hpp"

namespace httplib {
class Server;
}

namespace titration::advisor {

struct HttpOptions {
  std::string token;                 // empty disables the bearer-token check
  std::filesystem::path static_dir;  // served at / when set
  // Receives one JSON object per request; defaults to stderr.
  std::function<void(const std::string&)> log;
};

// Routes:
//   POST /v1/patients                      create from profile
//   GET  /v1/patients/{id}                 profile and current estimate
//   POST /v1/patients/{id}/fbg             {"time": min, "value": mg/dL}
//   POST /v1/patients/{id}/doses           {"time": min, "units": U}
//   GET  /v1/patients/{id}/recommendation
//   GET  /v1/patients/{id}/whatif?dose=U
//   GET  /v1/patients/{id}/history?offset=&limit=
void register_routes(httplib::Server& server, AdvisorService& service, HttpOptions options = {});

}  // namespace titration::advisor
