#pragma once

#include <stdexcept>
#include <string>

namespace spgnm {

/// Raised for malformed or shape-mismatched inputs.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an iterate stops being finite.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, long iteration)
        : std::runtime_error(what), iteration_(iteration) {}

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

}  // namespace spgnm
