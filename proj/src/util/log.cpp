#include "rct/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace rct {

namespace {

std::atomic<LogLevel> g_level{LogLevel::Warn};
std::ostream* g_out = &std::cerr;
std::mutex g_mutex;

void emit(LogLevel level, const char* tag, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(g_level.load())) return;
  std::lock_guard lock(g_mutex);
  if (g_out) *g_out << tag << ' ' << msg << '\n' << std::flush;
}

}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }
void set_log_stream(std::ostream* out) {
  std::lock_guard lock(g_mutex);
  g_out = out;
}

void log_warn(const std::string& msg) { emit(LogLevel::Warn, "[warn]", msg); }
void log_info(const std::string& msg) { emit(LogLevel::Info, "[info]", msg); }
void log_debug(const std::string& msg) { emit(LogLevel::Debug, "[debug]", msg); }

}  // namespace rct
