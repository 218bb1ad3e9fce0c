#include "quantconf/log.hpp"

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace quantconf::log {
namespace {

Level parse_env() {
    const char* env = std::getenv("QUANTCONF_LOG");
    if (env == nullptr) return Level::warn;
    const std::string v(env);
    if (v == "debug") return Level::debug;
    if (v == "info") return Level::info;
    if (v == "warn" || v == "warning") return Level::warn;
    if (v == "error") return Level::error;
    if (v == "off" || v == "quiet") return Level::off;
    return Level::warn;
}

spdlog::level::level_enum to_spdlog(Level lvl) {
    switch (lvl) {
        case Level::debug: return spdlog::level::debug;
        case Level::info: return spdlog::level::info;
        case Level::warn: return spdlog::level::warn;
        case Level::error: return spdlog::level::err;
        case Level::off: return spdlog::level::off;
    }
    return spdlog::level::warn;
}

spdlog::logger& logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto sink = std::make_shared<spdlog::sinks::stderr_sink_st>();
        auto lg = std::make_shared<spdlog::logger>("quantconf", sink);
        lg->set_pattern("[%l] %v");
        lg->set_level(to_spdlog(parse_env()));
        return lg;
    }();
    return *instance;
}

}  // namespace

Level level() {
    switch (logger().level()) {
        case spdlog::level::trace:
        case spdlog::level::debug: return Level::debug;
        case spdlog::level::info: return Level::info;
        case spdlog::level::warn: return Level::warn;
        case spdlog::level::err:
        case spdlog::level::critical: return Level::error;
        default: return Level::off;
    }
}

void set_level(Level lvl) { logger().set_level(to_spdlog(lvl)); }

void debug(std::string_view msg) { logger().debug("{}", msg); }
void info(std::string_view msg) { logger().info("{}", msg); }
void warn(std::string_view msg) { logger().warn("{}", msg); }
void error(std::string_view msg) { logger().error("{}", msg); }

}  // namespace quantconf::log
