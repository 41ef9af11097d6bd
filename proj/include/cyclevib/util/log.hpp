#pragma once

#include <functional>
#include <string>

namespace cyclevib::log {

enum class Level { kDebug, kInfo, kWarn, kError };

using Sink = std::function<void(Level, const std::string&)>;

/// Replaces the process-wide sink (default: stderr for warn/error, stdout for info). Returns the old one.
Sink set_sink(Sink sink);
void set_min_level(Level level);

void info(const std::string& msg);
void warn(const std::string& msg);
void error(const std::string& msg);

}  // namespace cyclevib::log
