#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hvr {

// Bad values supplied by the caller (non-finite input, empty sequence, ...).
struct InvalidInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched or out-of-range configuration (curvature/dim mismatch, bad level).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed persisted data. Carries the byte offset where parsing failed.
struct FormatError : std::runtime_error {
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
    std::uint64_t byte_offset;
};

}  // namespace hvr
