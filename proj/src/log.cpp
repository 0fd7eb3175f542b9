#include "pairvoice/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#include "pairvoice/csv.hpp"

namespace pairvoice::log {

namespace {

Level from_env() {
    const char* v = std::getenv("PAIRVOICE_LOG_LEVEL");
    if (!v) return Level::warn;
    const std::string s = csv::lower(v);
    if (s == "debug") return Level::debug;
    if (s == "info") return Level::info;
    if (s == "error") return Level::error;
    if (s == "off") return Level::off;
    return Level::warn;
}

std::atomic<int>& level_slot() {
    static std::atomic<int> slot{static_cast<int>(from_env())};
    return slot;
}

constexpr const char* kNames[] = {"debug", "info", "warn", "error"};

}  // namespace

Level threshold() { return static_cast<Level>(level_slot().load()); }
void set_threshold(Level level) { level_slot().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
    if (level < threshold() || level == Level::off) return;
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace pairvoice::log
