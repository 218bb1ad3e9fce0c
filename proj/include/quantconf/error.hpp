#pragma once

#include <stdexcept>
#include <string>

namespace quantconf {

// Every failure raised by the library carries the name of the module it came
// from, so the CLI can print "<module>: <message>" without extra bookkeeping.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

}  // namespace quantconf
