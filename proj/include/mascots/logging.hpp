#pragma once

#include <string>

namespace mascots::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

/// Active level, parsed once from the MASCOTS_LOG environment variable
/// (debug|info|warn|error|off). Defaults to warn.
Level level();

void write(Level lvl, const std::string& message);

inline void debug(const std::string& m) { write(Level::Debug, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void warn(const std::string& m) { write(Level::Warn, m); }
inline void error(const std::string& m) { write(Level::Error, m); }

}  // namespace mascots::log
