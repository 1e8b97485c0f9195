#pragma once

#include <stdexcept>
#include <string>

namespace keygaze {

/// Malformed or inconsistent input data (bad files, invariant violations).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid arguments or call contracts.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values, divergence, or other numerical breakdown.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace keygaze
