#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace abrnet {

/// Caller broke an API precondition (shape mismatch, unknown head, ...).
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Invalid configuration value (nonpositive dim, lambda out of range, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated file content.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File could not be opened / read / written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite value detected where finite math is required (NaN abort).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// FNV-1a over a byte range. Used for parameter-group checksums and
/// freeze-contract verification.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t seed = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
    return fnv1a(s.data(), s.size());
}

} // namespace abrnet
