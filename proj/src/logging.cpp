#include "mascots/logging.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace mascots::log {

namespace {

Level parse_level() {
    const char* env = std::getenv("MASCOTS_LOG");
    if (env == nullptr) return Level::Warn;
    const std::string v(env);
    if (v == "debug") return Level::Debug;
    if (v == "info") return Level::Info;
    if (v == "warn") return Level::Warn;
    if (v == "error") return Level::Error;
    if (v == "off") return Level::Off;
    return Level::Warn;
}

const char* tag(Level lvl) {
    switch (lvl) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
        default: return "?";
    }
}

std::mutex sink_mutex;

}  // namespace

Level level() {
    static const Level lvl = parse_level();
    return lvl;
}

void write(Level lvl, const std::string& message) {
    if (lvl < level()) return;
    std::lock_guard<std::mutex> lock(sink_mutex);
    std::cerr << "[mascots:" << tag(lvl) << "] " << message << '\n';
}

}  // namespace mascots::log
