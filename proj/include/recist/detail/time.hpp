#pragma once
// UTC timestamp handling. Instants are microseconds since the Unix epoch;
// conversions use the days-from-civil algorithm so no libc timezone state
// is involved.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "recist/detail/strings.hpp"

namespace recist {

using Instant = std::int64_t;  // microseconds since 1970-01-01T00:00:00Z

namespace detail {

constexpr std::int64_t kMicros = 1000000;

inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

inline Instant make_instant(int y, int mo, int d, int h, int mi, int s,
                            std::int64_t micros = 0) {
    return (days_from_civil(y, mo, d) * 86400 +
            static_cast<std::int64_t>(h) * 3600 + mi * 60 + s) *
               kMicros +
           micros;
}

// "2015-07-29 17:41:41,648" (ZooKeeper/Hadoop) and the ISO variants with
// '.' millis or no millis at all.
inline std::optional<Instant> parse_iso_like(std::string_view s) {
    int y, mo, d, h, mi, se;
    int ms = 0;
    int n = std::sscanf(std::string(s).c_str(), "%d-%d-%d %d:%d:%d,%d",
                        &y, &mo, &d, &h, &mi, &se, &ms);
    if (n < 6) {
        ms = 0;
        n = std::sscanf(std::string(s).c_str(), "%d-%d-%dT%d:%d:%d",
                        &y, &mo, &d, &h, &mi, &se);
        if (n < 6) return std::nullopt;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    return make_instant(y, mo, d, h, mi, se, static_cast<std::int64_t>(ms) * 1000);
}

// BGL: "2005-06-04-04.45.30" with an optional ".micros" tail.
inline std::optional<Instant> parse_bgl_stamp(std::string_view s) {
    int y, mo, d, h, mi, se;
    long micros = 0;
    int n = std::sscanf(std::string(s).c_str(), "%d-%d-%d-%d.%d.%d.%ld",
                        &y, &mo, &d, &h, &mi, &se, &micros);
    if (n < 6) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    return make_instant(y, mo, d, h, mi, se, micros);
}

inline int month_from_abbrev(std::string_view m) {
    static constexpr const char* names[] = {"jan", "feb", "mar", "apr",
                                            "may", "jun", "jul", "aug",
                                            "sep", "oct", "nov", "dec"};
    std::string lower = to_lower(m);
    for (int i = 0; i < 12; ++i)
        if (lower == names[i]) return i + 1;
    return 0;
}

// Syslog style, no year: "Dec 10 12:21:26". Caller supplies the year.
inline std::optional<Instant> parse_syslog_stamp(std::string_view mon,
                                                 std::string_view day,
                                                 std::string_view hms,
                                                 int year) {
    int m = month_from_abbrev(mon);
    if (m == 0) return std::nullopt;
    int d, h, mi, s;
    if (std::sscanf(std::string(day).c_str(), "%d", &d) != 1) return std::nullopt;
    if (std::sscanf(std::string(hms).c_str(), "%d:%d:%d", &h, &mi, &s) != 3)
        return std::nullopt;
    return make_instant(year, m, d, h, mi, s);
}

// Cloud Stateless CSV: "9/8/23 1:25" (M/D/YY H:MM[:SS]); years < 100 are 2000+.
inline std::optional<Instant> parse_mdY_stamp(std::string_view s) {
    int mo, d, y, h, mi, se = 0;
    int n = std::sscanf(std::string(s).c_str(), "%d/%d/%d %d:%d:%d",
                        &mo, &d, &y, &h, &mi, &se);
    if (n < 5) return std::nullopt;
    if (y < 100) y += 2000;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    return make_instant(y, mo, d, h, mi, se);
}

inline std::string format_instant(Instant t) {
    std::int64_t micros = t % kMicros;
    std::int64_t secs = t / kMicros;
    if (micros < 0) {
        micros += kMicros;
        secs -= 1;
    }
    std::int64_t days = secs / 86400;
    std::int64_t rem = secs % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y, mo, d;
    civil_from_days(days, y, mo, d);
    char buf[64];
    if (micros == 0) {
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, mo,
                      d, static_cast<int>(rem / 3600),
                      static_cast<int>((rem % 3600) / 60),
                      static_cast<int>(rem % 60));
    } else {
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06dZ", y,
                      mo, d, static_cast<int>(rem / 3600),
                      static_cast<int>((rem % 3600) / 60),
                      static_cast<int>(rem % 60), static_cast<int>(micros));
    }
    return buf;
}

}  // namespace detail
}  // namespace recist
