#include "causalcast/timeutil.hpp"

#include <cstdio>

#include "causalcast/common.hpp"

namespace causalcast {

namespace {

// Howard Hinnant's civil-date algorithms (public domain).
int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

int parse_fixed_int(const std::string& s, size_t pos, size_t len) {
    int v = 0;
    for (size_t i = pos; i < pos + len; ++i) {
        if (i >= s.size() || s[i] < '0' || s[i] > '9') return -1;
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

}  // namespace

Minutes parse_iso_minutes(const std::string& s) {
    // YYYY-MM-DDTHH:MM[:SS]
    const bool with_seconds = s.size() == 19;
    if (!(s.size() == 16 || with_seconds) || s[4] != '-' || s[7] != '-' ||
        (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
        fail("ParseError", "bad timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM[:SS])");
    }
    const int y = parse_fixed_int(s, 0, 4);
    const int mo = parse_fixed_int(s, 5, 2);
    const int d = parse_fixed_int(s, 8, 2);
    const int h = parse_fixed_int(s, 11, 2);
    const int mi = parse_fixed_int(s, 14, 2);
    int sec = 0;
    if (with_seconds) {
        if (s[16] != ':') fail("ParseError", "bad timestamp '" + s + "'");
        sec = parse_fixed_int(s, 17, 2);
    }
    if (y < 0 || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 ||
        mi < 0 || mi > 59 || sec != 0) {
        fail("ParseError", "bad timestamp '" + s + "'");
    }
    return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 1440 +
           h * 60 + mi;
}

std::string format_iso_minutes(Minutes t) {
    int64_t days = t / 1440;
    int64_t rem = t % 1440;
    if (rem < 0) {
        rem += 1440;
        days -= 1;
    }
    int64_t y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:00",
                  static_cast<long long>(y), mo, d,
                  static_cast<long long>(rem / 60), static_cast<long long>(rem % 60));
    return buf;
}

int day_of_week(Minutes t) {
    int64_t days = t / 1440;
    if (t % 1440 < 0) days -= 1;
    // 1970-01-01 was a Thursday (index 3 with Monday = 0).
    int dow = static_cast<int>((days + 3) % 7);
    return dow < 0 ? dow + 7 : dow;
}

int minute_of_day(Minutes t) {
    int64_t m = t % 1440;
    return static_cast<int>(m < 0 ? m + 1440 : m);
}

const char* to_string(TimePeriod p) {
    switch (p) {
        case TimePeriod::MorningPeak: return "MorningPeak";
        case TimePeriod::EveningPeak: return "EveningPeak";
        case TimePeriod::Offpeak: return "Offpeak";
        case TimePeriod::Night: return "Night";
    }
    return "?";
}

TimePeriod period_from_string(const std::string& s) {
    for (TimePeriod p : kAllPeriods) {
        if (s == to_string(p)) return p;
    }
    fail("ParseError", "unknown time period '" + s + "'");
}

TimePeriod PeriodBins::classify(Minutes t) const {
    const int m = minute_of_day(t);
    auto in_range = [m](int start, int end) {
        if (start <= end) return m >= start && m < end;
        return m >= start || m < end;  // wraps midnight
    };
    if (in_range(morning_start, morning_end)) return TimePeriod::MorningPeak;
    if (in_range(evening_start, evening_end)) return TimePeriod::EveningPeak;
    if (in_range(night_start, night_end)) return TimePeriod::Night;
    return TimePeriod::Offpeak;
}

}  // namespace causalcast
