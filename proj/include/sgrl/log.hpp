#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string>

namespace sgrl {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kQuiet = 3 };

inline std::atomic<LogLevel>& log_threshold() {
  static std::atomic<LogLevel> level{LogLevel::kWarn};
  return level;
}

inline void set_log_level(LogLevel level) { log_threshold().store(level); }

inline void log(LogLevel level, const std::string& msg) {
  if (level < log_threshold().load()) return;
  static std::mutex mu;
  static const char* const tags[] = {"debug", "info", "warn"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[sgrl " << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void log_info(const std::string& msg) { log(LogLevel::kInfo, msg); }
inline void log_warn(const std::string& msg) { log(LogLevel::kWarn, msg); }

}  // namespace sgrl
