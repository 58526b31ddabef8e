#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace parkmon {

using UtcTime = std::chrono::sys_time<std::chrono::milliseconds>;

// Accepts "YYYY-MM-DDTHH:MM:SS[.fff...][Z|+HH:MM|-HH:MM]". Sub-millisecond
// digits are truncated.
std::optional<UtcTime> parse_rfc3339(std::string_view text);

// Always UTC with a trailing 'Z'; the fraction is printed only when nonzero.
std::string format_rfc3339(UtcTime t);

inline constexpr std::int64_t to_millis(UtcTime t) { return t.time_since_epoch().count(); }
inline constexpr UtcTime from_millis(std::int64_t ms) { return UtcTime{std::chrono::milliseconds{ms}}; }

}  // namespace parkmon
