#include "titration/advisor/event_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <fmt/format.h>

namespace titration::advisor {

namespace {

// Drops a torn final line so later appends start on a fresh line.
void trim_torn_tail(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size == 0) return;
  std::ifstream f(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (text.back() == '\n') return;
  const auto cut = text.find_last_of('\n');
  std::filesystem::resize_file(path, cut == std::string::npos ? 0 : cut + 1);
}

}  // namespace

EventStore::EventStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  trim_torn_tail(path_);
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw std::runtime_error(fmt::format("cannot open {}: {}", path_.string(), std::strerror(errno)));
  }
}

EventStore::~EventStore() {
  if (fd_ >= 0) ::close(fd_);
}

void EventStore::append(const nlohmann::ordered_json& event) {
  const std::string line = event.dump() + "\n";
  std::lock_guard lock(mutex_);
  std::size_t done = 0;
  while (done < line.size()) {
    const auto n = ::write(fd_, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(fmt::format("append to {}: {}", path_.string(), std::strerror(errno)));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) {
    throw std::runtime_error(fmt::format("fsync {}: {}", path_.string(), std::strerror(errno)));
  }
}

std::vector<nlohmann::ordered_json> EventStore::replay() const {
  std::ifstream f(path_);
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  std::vector<nlohmann::ordered_json> events;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      events.push_back(nlohmann::ordered_json::parse(lines[i]));
    } catch (const nlohmann::json::parse_error&) {
      throw std::runtime_error(fmt::format("{}:{}: corrupt event", path_.string(), i + 1));
    }
  }
  return events;
}

}  // namespace titration::advisor
