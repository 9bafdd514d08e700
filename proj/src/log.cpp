#include "multisage/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace multisage::log {
namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

const char* tag(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: break;
  }
  return "";
}
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }
bool enabled(Level l) { return l >= g_level.load() && l != Level::off; }

void write(Level l, std::string_view message) {
  if (!enabled(l)) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[" << tag(l) << "] " << message << '\n';
}

}  // namespace multisage::log
