#pragma once

#include <stdexcept>
#include <string>

namespace swapsim {

/// A computation failed to reach its accuracy or validity contract
/// (quadrature non-convergence, degenerate heralding, failed eigen-solve).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration or input file. `where` names the file, line or field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what), where_(where) {}

    const std::string& where() const { return where_; }

private:
    std::string where_;
};

}  // namespace swapsim
