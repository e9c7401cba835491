#pragma once

// Append-only JSON-lines event log. Each append is one write(2) followed by
// fsync; a torn final line left by a crash is cut off when the log is reopened.

#include <filesystem>
#include <mutex>
#include <vector>

#include <json.hpp>

namespace titration::advisor {

class EventStore {
 public:
  // Opens (creating if needed) the log file.
  explicit EventStore(std::filesystem::path path);
  ~EventStore();
  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  void append(const nlohmann::ordered_json& event);
  std::vector<nlohmann::ordered_json> replay() const;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::mutex mutex_;
};

}  // namespace titration::advisor
