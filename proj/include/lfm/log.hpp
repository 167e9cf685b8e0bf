#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace lfm::log {

enum Level { kError = 0, kInfo = 1, kDebug = 2 };

/// Verbosity from the LFM_LOG environment variable (error|info|debug).
inline Level level() {
  static const Level lvl = [] {
    const char* env = std::getenv("LFM_LOG");
    if (!env) return kError;
    const std::string s(env);
    if (s == "debug") return kDebug;
    if (s == "info") return kInfo;
    return kError;
  }();
  return lvl;
}

template <typename... Args>
void emit(const char* tag, const char* fmt, Args... args) {
  if constexpr (sizeof...(Args) == 0)
    std::fprintf(stderr, "[%s] %s\n", tag, fmt);
  else {
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void error(const char* fmt, Args... args) {
  emit("error", fmt, args...);
}

template <typename... Args>
void info(const char* fmt, Args... args) {
  if (level() >= kInfo) emit("info", fmt, args...);
}

template <typename... Args>
void debug(const char* fmt, Args... args) {
  if (level() >= kDebug) emit("debug", fmt, args...);
}

} // namespace lfm::log
