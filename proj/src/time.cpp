#include "cobridge/time.hpp"

#include "cobridge/error.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <limits>

namespace cobridge {

namespace {

constexpr std::int64_t kNanosPerSecond = 1'000'000'000;
constexpr std::int64_t kSecondsPerDay = 86'400;

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
    static constexpr std::array<unsigned, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29u : kDays[m - 1];
}

struct Civil {
    std::int64_t year;
    unsigned month;
    unsigned day;
};

// Inverse of days_from_civil (H. Hinnant's algorithm).
Civil civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {m <= 2 ? y + 1 : y, m, d};
}

class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    std::int64_t digits(std::size_t count, const char* field) {
        if (pos_ + count > text_.size()) throw ParseError(field, "truncated timestamp");
        std::int64_t v = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const char c = text_[pos_ + i];
            if (c < '0' || c > '9') throw ParseError(field, "expected digit");
            v = v * 10 + (c - '0');
        }
        pos_ += count;
        return v;
    }

    void expect(char c, const char* field) {
        if (pos_ >= text_.size() || text_[pos_] != c) {
            throw ParseError(field, std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    bool accept(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool at_digit() const { return pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9'; }
    bool done() const { return pos_ == text_.size(); }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

EpochNanos parse_timestamp(std::string_view text) {
    Cursor cur(text);
    const std::int64_t year = cur.digits(4, "year");
    cur.expect('-', "year");
    const auto month = static_cast<unsigned>(cur.digits(2, "month"));
    if (month < 1 || month > 12) throw ParseError("month", "out of range");
    cur.expect('-', "month");
    const auto day = static_cast<unsigned>(cur.digits(2, "day"));
    if (day < 1 || day > days_in_month(year, month)) throw ParseError("day", "out of range");
    if (!cur.accept('T') && !cur.accept('t')) throw ParseError("day", "expected 'T'");
    const std::int64_t hour = cur.digits(2, "hour");
    if (hour > 23) throw ParseError("hour", "out of range");
    cur.expect(':', "hour");
    const std::int64_t minute = cur.digits(2, "minute");
    if (minute > 59) throw ParseError("minute", "out of range");
    cur.expect(':', "minute");
    const std::int64_t second = cur.digits(2, "second");
    if (second > 59) throw ParseError("second", "out of range (leap seconds unsupported)");

    std::int64_t fraction = 0;
    if (cur.accept('.')) {
        if (!cur.at_digit()) throw ParseError("fraction", "expected digit");
        int n = 0;
        while (cur.at_digit()) {
            if (++n > 9) throw ParseError("fraction", "more than 9 digits");
            fraction = fraction * 10 + cur.digits(1, "fraction");
        }
        for (; n < 9; ++n) fraction *= 10;
    }

    std::int64_t offset_seconds = 0;
    if (!cur.accept('Z') && !cur.accept('z')) {
        const char sign = cur.peek();
        if (sign != '+' && sign != '-') throw ParseError("offset", "expected 'Z' or a numeric offset");
        cur.accept(sign);
        const std::int64_t oh = cur.digits(2, "offset");
        cur.expect(':', "offset");
        const std::int64_t om = cur.digits(2, "offset");
        if (oh > 23 || om > 59) throw ParseError("offset", "out of range");
        offset_seconds = (oh * 3600 + om * 60) * (sign == '-' ? -1 : 1);
    }
    if (!cur.done()) throw ParseError("offset", "trailing characters");

    const std::int64_t seconds = days_from_civil(year, month, day) * kSecondsPerDay + hour * 3600 +
                                 minute * 60 + second - offset_seconds;
    return seconds * kNanosPerSecond + fraction;
}

std::string format_timestamp(EpochNanos ts) {
    std::int64_t seconds = ts / kNanosPerSecond;
    std::int64_t nanos = ts % kNanosPerSecond;
    if (nanos < 0) {
        nanos += kNanosPerSecond;
        --seconds;
    }
    std::int64_t days = seconds / kSecondsPerDay;
    std::int64_t sod = seconds % kSecondsPerDay;
    if (sod < 0) {
        sod += kSecondsPerDay;
        --days;
    }
    const Civil c = civil_from_days(days);

    char buf[64];
    int len = std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                            static_cast<long long>(c.year), c.month, c.day,
                            static_cast<long long>(sod / 3600), static_cast<long long>(sod / 60 % 60),
                            static_cast<long long>(sod % 60));
    std::string out(buf, static_cast<std::size_t>(len));
    if (nanos != 0) {
        len = std::snprintf(buf, sizeof buf, ".%09lld", static_cast<long long>(nanos));
        std::string frac(buf, static_cast<std::size_t>(len));
        while (frac.back() == '0') frac.pop_back();
        out += frac;
    }
    out += 'Z';
    return out;
}

SimTime epoch_map(EpochNanos data_ts, EpochNanos scenario_epoch) {
    if (data_ts < scenario_epoch) {
        throw std::range_error("data timestamp " + format_timestamp(data_ts) +
                               " precedes scenario epoch " + format_timestamp(scenario_epoch));
    }
    return SimTime(data_ts - scenario_epoch);
}

Duration parse_duration(std::string_view text) {
    const std::string_view original = text;
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);

    std::size_t i = 0;
    while (i < text.size() && ((text[i] >= '0' && text[i] <= '9') || text[i] == '.')) ++i;
    const std::string_view number = text.substr(0, i);
    const std::string_view unit = text.substr(i);

    std::int64_t scale = 0;
    int scale_digits = 0;
    if (unit == "ns") {
        scale = 1;
    } else if (unit == "us") {
        scale = 1'000;
        scale_digits = 3;
    } else if (unit == "ms") {
        scale = 1'000'000;
        scale_digits = 6;
    } else if (unit == "s") {
        scale = kNanosPerSecond;
        scale_digits = 9;
    } else {
        throw ParseError("duration", "missing or unknown unit in '" + std::string(original) + "'");
    }

    const auto dot = number.find('.');
    const std::string_view whole = number.substr(0, dot);
    const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : number.substr(dot + 1);
    if (whole.empty() || (dot != std::string_view::npos && frac.empty()) ||
        frac.find('.') != std::string_view::npos) {
        throw ParseError("duration", "malformed number in '" + std::string(original) + "'");
    }
    if (static_cast<int>(frac.size()) > scale_digits) {
        throw ParseError("duration", "finer than 1ns in '" + std::string(original) + "'");
    }

    std::int64_t w = 0;
    if (auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
        ec != std::errc() || p != whole.data() + whole.size()) {
        throw ParseError("duration", "malformed number in '" + std::string(original) + "'");
    }
    if (w > std::numeric_limits<std::int64_t>::max() / scale) {
        throw ParseError("duration", "overflow in '" + std::string(original) + "'");
    }
    std::int64_t f = 0;
    std::int64_t f_scale = scale;
    for (char c : frac) {
        f_scale /= 10;
        f += (c - '0') * f_scale;
    }
    return Duration(w * scale + f);
}

std::string format_duration(Duration d) {
    const std::int64_t n = d.nanos();
    if (n == 0) return "0s";
    if (n % kNanosPerSecond == 0) return std::to_string(n / kNanosPerSecond) + "s";
    if (n % 1'000'000 == 0) return std::to_string(n / 1'000'000) + "ms";
    if (n % 1'000 == 0) return std::to_string(n / 1'000) + "us";
    return std::to_string(n) + "ns";
}

}  // namespace cobridge
