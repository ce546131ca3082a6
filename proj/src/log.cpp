#include "crfiqa/log.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>

namespace crfiqa {

namespace {

std::optional<LogLevel> g_override;

LogLevel level_from_env() {
  const char* raw = std::getenv("CRFIQA_LOG_LEVEL");
  if (raw == nullptr) return LogLevel::info;
  const std::string v(raw);
  if (v == "error") return LogLevel::error;
  if (v == "warn") return LogLevel::warn;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  std::cerr << "[warn] unknown CRFIQA_LOG_LEVEL '" << v << "', using info\n";
  return LogLevel::info;
}

const char* tag(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

LogLevel log_level() {
  if (g_override) return *g_override;
  static const LogLevel env_level = level_from_env();
  return env_level;
}

void set_log_level(LogLevel level) { g_override = level; }

void log_message(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::cerr << "[" << tag(level) << "] " << message << "\n";
}

}  // namespace crfiqa
