#pragma once

#include <string>

namespace adr {

enum class LogLevel : int { error = 0, warn = 1, info = 2, debug = 3 };

/// Level comes from ADR_LOG_LEVEL (error|warn|info|debug), read once;
/// defaults to warn. Everything goes to stderr so result files stay clean.
LogLevel log_level();
void log_msg(LogLevel level, const std::string& msg);

inline void log_error(const std::string& m) { log_msg(LogLevel::error, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::warn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::debug, m); }

}  // namespace adr
