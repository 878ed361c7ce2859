#pragma once

#include <iosfwd>
#include <string>

namespace rct {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

/// Process-wide sink, stderr at Warn unless changed. Lines are prefixed
/// with the level and written whole under a lock.
void set_log_level(LogLevel level);
LogLevel log_level();
void set_log_stream(std::ostream* out);

void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace rct
