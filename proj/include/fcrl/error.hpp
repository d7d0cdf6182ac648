#pragma once

#include <stdexcept>
#include <string>

namespace fcrl {

// Thrown when tensor shapes disagree with an operation's contract.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad input files, malformed CSV, schema violations. CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required. CLI exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside its mathematical domain (e.g. V >= 2 for f).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace fcrl
