#pragma once

#include <stdexcept>
#include <string>

namespace awdiff {

// Error taxonomy used across the library. All of these derive from
// std::runtime_error so callers that don't care about the distinction can
// catch one type; the CLI maps any of them to exit code 1.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, bad header fields).
struct FormatError : Error {
    using Error::Error;
};

// File present but payload inconsistent with its own header.
struct CorruptionError : Error {
    using Error::Error;
};

// Filesystem-level failure (missing file, unwritable path).
struct IoError : Error {
    using Error::Error;
};

// Caller passed an argument outside the documented domain.
struct ParameterError : Error {
    using Error::Error;
};

// A value-type invariant was violated (shape mismatch, non-finite data).
struct InvariantError : Error {
    using Error::Error;
};

// Numerical blow-up inside an iterative computation.
struct DivergenceError : Error {
    using Error::Error;
};

} // namespace awdiff
