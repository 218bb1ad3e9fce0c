#pragma once

#include <string_view>

namespace quantconf::log {

enum class Level { debug, info, warn, error, off };

// Level is read once from QUANTCONF_LOG (debug|info|warn|error|off, default warn).
Level level();
void set_level(Level lvl);

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

}  // namespace quantconf::log
