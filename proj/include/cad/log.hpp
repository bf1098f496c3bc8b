// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string_view>

namespace cad::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

/// Process-wide threshold; messages below it are dropped. Defaults to Info,
/// or to the value of CAD_LOG_LEVEL (debug|info|warn|error|off).
void set_level(Level level);
/// "debug", "info", "warn", "error" or "off".
std::optional<Level> parse_level(std::string_view name);
Level level();

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::Debug, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void error(std::string_view m) { write(Level::Error, m); }

}  // namespace cad::log
