#pragma once

#include <stdexcept>
#include <string>

namespace ktree {

// Bad model/config input (maps to CLI exit 2).
struct SpecError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Runtime model failures (maps to CLI exit 1).
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OverflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A clock was queried beyond its generated mass; the caller must extend
// generation before retrying.
struct HorizonExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// match_distortion could not align the two paths' interval value sequences.
struct NoMatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MemoryCapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ktree
