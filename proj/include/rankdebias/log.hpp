#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace rankdebias {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Level comes from RANKDEBIAS_LOG (error|warn|info|debug), default warn.
// Unrecognized values fall back to warn so a typo never silences errors.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("RANKDEBIAS_LOG");
        if (env == nullptr) return LogLevel::warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
        if (std::strcmp(env, "info") == 0) return LogLevel::info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

inline bool log_enabled(LogLevel lvl) {
    return static_cast<int>(lvl) <= static_cast<int>(log_level());
}

inline void log_msg(LogLevel lvl, const std::string& msg) {
    if (!log_enabled(lvl)) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

}  // namespace rankdebias
