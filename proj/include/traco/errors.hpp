#pragma once

#include <stdexcept>
#include <string>

namespace traco {

// Operand dimensions do not line up.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A computation produced NaN/Inf or otherwise left the numeric domain.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (unknown keys, empty vocabulary, bad ranges).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File could not be read or written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A persisted file has the wrong version tag or layout.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace traco
