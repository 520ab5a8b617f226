#pragma once

#include <stdexcept>
#include <string>

namespace laketemp {

/// Malformed or inconsistent input data (bad CSV, shape mismatch between
/// files, out-of-range indices). Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (non-finite loss or gradient, violated stability
/// limit, invalid operand shapes). Maps to CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace laketemp
