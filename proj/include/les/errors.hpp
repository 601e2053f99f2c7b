#pragma once
#include <stdexcept>
#include <string>

namespace les {

/**
 * Raised when input data cannot be used as given: constant columns,
 * non-finite entries, malformed files, degenerate fits.
 */
class DataError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/**
 * Raised for invalid options or tuning configuration.
 */
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Raised by batch drivers when too many fits fail to converge.
 */
class ConvergenceError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace les
