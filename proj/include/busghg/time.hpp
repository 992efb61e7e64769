#pragma once

// Instants are kept as integer milliseconds since the Unix epoch (UTC).
// Calendar attribution (day, hour, weekday, month) always goes through a
// configured local UTC offset, never through the offset a record was
// written with.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "busghg/error.hpp"

namespace busghg {

using Date = std::chrono::sys_days;
using YearMonth = std::chrono::year_month;

struct Timestamp {
    std::int64_t ms = 0;  ///< milliseconds since 1970-01-01T00:00:00Z

    friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Seconds between two instants (b - a).
inline double seconds_between(Timestamp a, Timestamp b) {
    return static_cast<double>(b.ms - a.ms) / 1000.0;
}

struct UtcOffset {
    int minutes = 0;

    friend constexpr bool operator==(const UtcOffset&, const UtcOffset&) = default;
};

namespace detail {

inline bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) {
        return false;
    }
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') {
            return false;
        }
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

/// Parses "Z", "+HH:MM", "+HHMM" or "+HH" starting at `pos`, consuming the rest of `s`.
inline std::optional<int> parse_offset_suffix(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) {
        return std::nullopt;
    }
    if (s[pos] == 'Z' || s[pos] == 'z') {
        return pos + 1 == s.size() ? std::optional<int>(0) : std::nullopt;
    }
    if (s[pos] != '+' && s[pos] != '-') {
        return std::nullopt;
    }
    const int sign = s[pos] == '-' ? -1 : 1;
    int hh = 0;
    int mm = 0;
    if (!read_digits(s, pos + 1, 2, hh)) {
        return std::nullopt;
    }
    std::size_t rest = pos + 3;
    if (rest < s.size()) {
        if (s[rest] == ':') {
            ++rest;
        }
        if (!read_digits(s, rest, 2, mm) || rest + 2 != s.size()) {
            return std::nullopt;
        }
    }
    if (hh > 18 || mm > 59) {
        return std::nullopt;
    }
    return sign * (hh * 60 + mm);
}

}  // namespace detail

inline std::optional<UtcOffset> parse_utc_offset(std::string_view s) {
    while (!s.empty() && s.front() == ' ') {
        s.remove_prefix(1);
    }
    while (!s.empty() && s.back() == ' ') {
        s.remove_suffix(1);
    }
    if (s == "UTC") {
        return UtcOffset{0};
    }
    const auto m = detail::parse_offset_suffix(s, 0);
    if (!m) {
        return std::nullopt;
    }
    return UtcOffset{*m};
}

inline std::string format_utc_offset(UtcOffset off) {
    const int m = off.minutes < 0 ? -off.minutes : off.minutes;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%c%02d:%02d", off.minutes < 0 ? '-' : '+', m / 60, m % 60);
    return buf;
}

/// Parses ISO-8601 "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|+HHMM|+HH]". A space may
/// replace 'T'. The UTC offset is mandatory.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    int y = 0, mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
    if (s.size() < 20 || !detail::read_digits(s, 0, 4, y) || s[4] != '-' || !detail::read_digits(s, 5, 2, mo) ||
        s[7] != '-' || !detail::read_digits(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
        !detail::read_digits(s, 11, 2, hh) || s[13] != ':' || !detail::read_digits(s, 14, 2, mi) || s[16] != ':' ||
        !detail::read_digits(s, 17, 2, ss)) {
        return std::nullopt;
    }
    std::size_t pos = 19;
    std::int64_t frac_ms = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        int scale = 100;
        const std::size_t begin = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            frac_ms += scale * (s[pos] - '0');
            scale /= 10;
            ++pos;
        }
        if (pos == begin) {
            return std::nullopt;
        }
    }
    const auto offset = detail::parse_offset_suffix(s, pos);
    if (!offset) {
        return std::nullopt;
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mi > 59 || ss > 59) {
        return std::nullopt;
    }
    const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
    const std::int64_t local_s = days * 86400 + hh * 3600 + mi * 60 + ss;
    const std::int64_t utc_s = local_s - static_cast<std::int64_t>(*offset) * 60;
    return Timestamp{utc_s * 1000 + frac_ms};
}

/// Formats an instant as local time at `off`, e.g. "2015-03-01T10:00:00-03:00".
/// Milliseconds are printed only when non-zero.
inline std::string format_timestamp(Timestamp t, UtcOffset off) {
    using namespace std::chrono;
    const std::int64_t local_ms = t.ms + static_cast<std::int64_t>(off.minutes) * 60'000;
    const std::int64_t days = detail::floor_div(local_ms, 86'400'000);
    const std::int64_t in_day = local_ms - days * 86'400'000;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    const int hh = static_cast<int>(in_day / 3'600'000);
    const int mi = static_cast<int>((in_day / 60'000) % 60);
    const int ss = static_cast<int>((in_day / 1000) % 60);
    const int ms = static_cast<int>(in_day % 1000);
    char buf[48];
    if (ms != 0) {
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03d", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hh, mi, ss, ms);
    } else {
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hh, mi, ss);
    }
    return std::string(buf) + format_utc_offset(off);
}

/// Calendar day of `t` in local time.
inline Date local_day(Timestamp t, UtcOffset off) {
    const std::int64_t local_ms = t.ms + static_cast<std::int64_t>(off.minutes) * 60'000;
    return Date{std::chrono::days{detail::floor_div(local_ms, 86'400'000)}};
}

/// Hour of day 0..23 in local time.
inline int local_hour(Timestamp t, UtcOffset off) {
    const std::int64_t local_ms = t.ms + static_cast<std::int64_t>(off.minutes) * 60'000;
    const std::int64_t in_day = local_ms - detail::floor_div(local_ms, 86'400'000) * 86'400'000;
    return static_cast<int>(in_day / 3'600'000);
}

/// Instant of local midnight starting `d`.
inline Timestamp local_midnight(Date d, UtcOffset off) {
    const std::int64_t days = d.time_since_epoch().count();
    return Timestamp{(days * 86400 - static_cast<std::int64_t>(off.minutes) * 60) * 1000};
}

inline YearMonth year_month_of(Date d) {
    const std::chrono::year_month_day ymd{d};
    return ymd.year() / ymd.month();
}

/// ISO weekday index 0 = Monday .. 6 = Sunday.
inline unsigned weekday_index(Date d) {
    return std::chrono::weekday{d}.iso_encoding() - 1;
}

inline constexpr std::string_view kWeekdayNames[7] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};

inline std::optional<unsigned> parse_weekday(std::string_view s) {
    for (unsigned i = 0; i < 7; ++i) {
        const auto& n = kWeekdayNames[i];
        if (s.size() == 3 && (s[0] | 0x20) == (n[0] | 0x20) && (s[1] | 0x20) == (n[1] | 0x20) &&
            (s[2] | 0x20) == (n[2] | 0x20)) {
            return i;
        }
    }
    return std::nullopt;
}

inline std::optional<Date> parse_date(std::string_view s) {
    using namespace std::chrono;
    int y = 0, mo = 0, d = 0;
    if (s.size() != 10 || !detail::read_digits(s, 0, 4, y) || s[4] != '-' || !detail::read_digits(s, 5, 2, mo) ||
        s[7] != '-' || !detail::read_digits(s, 8, 2, d)) {
        return std::nullopt;
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return sys_days{ymd};
}

inline std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline std::optional<YearMonth> parse_year_month(std::string_view s) {
    using namespace std::chrono;
    int y = 0, mo = 0;
    if (s.size() != 7 || !detail::read_digits(s, 0, 4, y) || s[4] != '-' || !detail::read_digits(s, 5, 2, mo) ||
        mo < 1 || mo > 12) {
        return std::nullopt;
    }
    return year{y} / month{static_cast<unsigned>(mo)};
}

inline std::string format_year_month(YearMonth ym) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u", static_cast<int>(ym.year()), static_cast<unsigned>(ym.month()));
    return buf;
}

inline Date require_date(std::string_view s, const std::string& what) {
    const auto d = parse_date(s);
    if (!d) {
        throw ConfigError(what + ": invalid date '" + std::string(s) + "' (expected YYYY-MM-DD)");
    }
    return *d;
}

}  // namespace busghg
