#include "cyclevib/util/log.hpp"

#include <iostream>
#include <mutex>

namespace cyclevib::log {

namespace {

std::mutex& mutex() {
  static std::mutex m;
  return m;
}

Sink& sink() {
  static Sink s = [](Level level, const std::string& msg) {
    if (level >= Level::kWarn) {
      std::cerr << (level == Level::kWarn ? "[warn] " : "[error] ") << msg << '\n';
    } else {
      std::cout << msg << '\n';
    }
  };
  return s;
}

Level& min_level() {
  static Level l = Level::kInfo;
  return l;
}

void emit(Level level, const std::string& msg) {
  std::lock_guard lock(mutex());
  if (level < min_level()) return;
  if (sink()) sink()(level, msg);
}

}  // namespace

Sink set_sink(Sink s) {
  std::lock_guard lock(mutex());
  std::swap(sink(), s);
  return s;
}

void set_min_level(Level level) {
  std::lock_guard lock(mutex());
  min_level() = level;
}

void info(const std::string& msg) { emit(Level::kInfo, msg); }
void warn(const std::string& msg) { emit(Level::kWarn, msg); }
void error(const std::string& msg) { emit(Level::kError, msg); }

}  // namespace cyclevib::log
