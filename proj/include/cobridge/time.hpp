#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cobridge {

/// Non-negative span of time with nanosecond resolution.
class Duration {
public:
    constexpr Duration() = default;
    constexpr explicit Duration(std::int64_t nanos) : nanos_(nanos) {
        if (nanos < 0) throw std::invalid_argument("Duration must be non-negative");
    }

    static constexpr Duration from_micros(std::int64_t us) { return Duration(us * 1'000); }
    static constexpr Duration from_millis(std::int64_t ms) { return Duration(ms * 1'000'000); }
    static constexpr Duration from_seconds(std::int64_t s) { return Duration(s * 1'000'000'000); }
    static constexpr Duration zero() { return Duration(); }

    constexpr std::int64_t nanos() const noexcept { return nanos_; }
    constexpr std::chrono::nanoseconds chrono() const noexcept { return std::chrono::nanoseconds(nanos_); }
    constexpr bool is_zero() const noexcept { return nanos_ == 0; }

    constexpr auto operator<=>(const Duration&) const = default;

    constexpr Duration operator+(Duration other) const { return Duration(nanos_ + other.nanos_); }
    constexpr Duration operator*(std::int64_t k) const { return Duration(nanos_ * k); }
    constexpr Duration operator/(std::int64_t k) const { return Duration(nanos_ / k); }

private:
    std::int64_t nanos_ = 0;
};

/// A point on the simulation time axis: nanoseconds since the scenario epoch.
class SimTime {
public:
    constexpr SimTime() = default;
    constexpr explicit SimTime(std::int64_t nanos) : nanos_(nanos) {
        if (nanos < 0) throw std::invalid_argument("SimTime must be non-negative");
    }

    constexpr std::int64_t nanos() const noexcept { return nanos_; }

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(Duration d) const { return SimTime(nanos_ + d.nanos()); }
    /// Distance between two time points; `*this` must not be earlier than `earlier`.
    constexpr Duration operator-(SimTime earlier) const { return Duration(nanos_ - earlier.nanos_); }

private:
    std::int64_t nanos_ = 0;
};

/// Nanoseconds since the Unix epoch, as carried by wire timestamps.
using EpochNanos = std::int64_t;

/// Parses an ISO-8601 UTC timestamp (`Z` or `+hh:mm` offset, up to 9 fractional digits).
/// Throws ParseError naming the offending field.
EpochNanos parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DDThh:mm:ss[.fffffffff]Z`; the fraction is omitted when zero and
/// trailing zeros are trimmed.
std::string format_timestamp(EpochNanos ts);

/// Maps a data timestamp onto the simulation axis. Throws std::range_error when
/// `data_ts` precedes `scenario_epoch`.
SimTime epoch_map(EpochNanos data_ts, EpochNanos scenario_epoch);

/// Parses durations written with a unit suffix: `ns`, `us`, `ms`, `s`, e.g. `2ms`, `0.2s`.
Duration parse_duration(std::string_view text);

/// Shortest exact representation using the largest unit that divides evenly.
std::string format_duration(Duration d);

/// Days since 1970-01-01 of a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t year, unsigned month, unsigned day) noexcept;

}  // namespace cobridge
