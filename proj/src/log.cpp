#include "adr/log.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

namespace adr {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("ADR_LOG_LEVEL");
        const std::string v = env ? env : "";
        if (v == "error") return LogLevel::error;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

void log_msg(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace adr
