#include "radiomap/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace radiomap::log {
namespace {
std::atomic<Level> g_level{Level::kInfo};
std::mutex g_mutex;

const char* tag(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    default: return "";
  }
}
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "[" << tag(level) << "] " << message << '\n';
}

}  // namespace radiomap::log
