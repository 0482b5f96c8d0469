#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pob {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Absolute simulation or wall-clock instant in nanoseconds.
using TimeNs = std::uint64_t;
/// Signed interval in nanoseconds.
using DurationNs = std::int64_t;

using ChallengerId = std::uint32_t;

inline constexpr DurationNs kNanosPerMilli = 1'000'000;
inline constexpr DurationNs kNanosPerSecond = 1'000'000'000;

constexpr DurationNs millis(double ms) { return static_cast<DurationNs>(ms * 1e6 + (ms >= 0 ? 0.5 : -0.5)); }
constexpr double to_seconds(DurationNs d) { return static_cast<double>(d) / 1e9; }

/// Caller passed a value outside an operation's domain.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pob
