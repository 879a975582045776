#pragma once

#include <stdexcept>
#include <string>

namespace id3 {

// Invalid user-supplied configuration (bad widths, epsilon <= 0, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape mismatch in an operation.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad runtime input (label out of range, empty dataset, ...).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (backward on a non-scalar, candidate-set mismatch, ...).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Budget exceeds the free candidate set in strict mode.
struct SelectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed sparse-checkpoint byte stream; carries the byte offset.
struct FormatError : std::runtime_error {
    std::size_t offset;
    FormatError(const std::string& what, std::size_t off)
        : std::runtime_error(what + " (at byte offset " + std::to_string(off) + ")"),
          offset(off) {}
};

// Checkpoint does not fit the target model.
struct ApplyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor dimension too large for the 32-bit index format.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace id3
