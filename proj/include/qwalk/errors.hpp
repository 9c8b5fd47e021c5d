#pragma once

#include <stdexcept>
#include <string>

namespace qwalk {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition violations: out-of-range numerators, bad probabilities,
// dimension mismatches, malformed flags, non-unimodular matrices, ...
struct InvalidInput : Error {
    explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// A walk (or a distribution support) ran past the pre-allocated label
// field.  The caller must regenerate a larger environment; message
// carries the tile that was requested.
struct EnvironmentExhausted : Error {
    explicit EnvironmentExhausted(const std::string& msg) : Error(msg) {}
};

// File-format or filesystem failures.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace qwalk
