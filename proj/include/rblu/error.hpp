#pragma once

#include <stdexcept>
#include <string>

namespace rblu {

/// Malformed or inconsistent input data (bad dimensions, non-finite values,
/// unreadable files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand sizes disagree. The message names the offending operand.
class DimensionError : public DataError {
public:
    using DataError::DataError;
};

/// A numerical routine could not proceed: non-SPD systems, rank deficiency,
/// solver non-convergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& operand, const std::string& what) {
    if (!ok) throw DimensionError(operand + ": " + what);
}

inline std::string shape(long rows, long cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace detail
}  // namespace rblu
