// SPDX-License-Identifier: Apache-2.0
#include "cad/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace cad::log {
namespace {

Level initial_level() {
  const char* env = std::getenv("CAD_LOG_LEVEL");
  return env ? parse_level(env).value_or(Level::Info) : Level::Info;
}

std::atomic<Level>& threshold() {
  static std::atomic<Level> value{initial_level()};
  return value;
}

constexpr const char* kTags[] = {"debug", "info", "warn", "error"};

}  // namespace

std::optional<Level> parse_level(std::string_view v) {
  if (v == "debug") return Level::Debug;
  if (v == "info") return Level::Info;
  if (v == "warn") return Level::Warn;
  if (v == "error") return Level::Error;
  if (v == "off") return Level::Off;
  return std::nullopt;
}

void set_level(Level l) { threshold().store(l); }
Level level() { return threshold().load(); }

void write(Level l, std::string_view message) {
  if (l < level() || l == Level::Off) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[" << kTags[static_cast<int>(l)] << "] " << message << '\n';
}

}  // namespace cad::log
