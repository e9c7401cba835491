// HTTP advisor service.
//
//   titration-advisor --port 8080 --data-dir ./advisor-data [--token T] [--config file.ini]
//
// Each flag falls back to an environment variable: ADVISOR_PORT, ADVISOR_DATA_DIR,
// ADVISOR_TOKEN, ADVISOR_CONFIG, ADVISOR_STATIC_DIR.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "titration/advisor/http_api.hpp"
#include "titration/config.hpp"

using namespace titration;

int main(int argc, char** argv) {
  CLI::App app{"Basal insulin titration advisor"};
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir = "advisor-data";
  std::string token;
  std::string config;
  std::string static_dir;
  app.add_option("--port", port)->envname("ADVISOR_PORT")->check(CLI::Range(1, 65535));
  app.add_option("--host", host)->envname("ADVISOR_HOST");
  app.add_option("--data-dir", data_dir)->envname("ADVISOR_DATA_DIR");
  app.add_option("--token", token, "require 'Authorization: Bearer <token>'")->envname("ADVISOR_TOKEN");
  app.add_option("--config", config, "INI with default [titration] and [prior]")
      ->envname("ADVISOR_CONFIG")
      ->check(CLI::ExistingFile);
  app.add_option("--static-dir", static_dir, "serve a web client from here")
      ->envname("ADVISOR_STATIC_DIR")
      ->check(CLI::ExistingDirectory);
  CLI11_PARSE(app, argc, argv);

  try {
    advisor::ServiceOptions options;
    if (!config.empty()) {
      const auto cfg = load_config(config);
      options.default_config = cfg.run.config;
      options.default_prior = cfg.run.prior;
    }
    advisor::AdvisorService service(data_dir, options);
    std::cerr << "replayed " << service.patient_count() << " patients from " << data_dir << '\n';

    httplib::Server server;
    advisor::register_routes(server, service, {token, static_dir, {}});
    std::cerr << "listening on " << host << ':' << port << '\n';
    if (!server.listen(host, port)) {
      std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
