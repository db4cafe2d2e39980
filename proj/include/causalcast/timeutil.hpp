#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace causalcast {

/// Naive local time, stored as whole minutes since 1970-01-01T00:00.
/// Sub-minute precision never occurs in this pipeline (the finest sampling
/// interval is one minute).
using Minutes = int64_t;

/// Parses "YYYY-MM-DDTHH:MM" or "YYYY-MM-DDTHH:MM:SS" (seconds must be 00).
/// Throws ParseError on anything else.
Minutes parse_iso_minutes(const std::string& s);

/// Formats as "YYYY-MM-DDTHH:MM:00".
std::string format_iso_minutes(Minutes t);

/// 0 = Monday ... 6 = Sunday.
int day_of_week(Minutes t);

int minute_of_day(Minutes t);

enum class TimePeriod : uint8_t { MorningPeak, EveningPeak, Offpeak, Night };

constexpr std::array<TimePeriod, 4> kAllPeriods = {
    TimePeriod::MorningPeak, TimePeriod::EveningPeak, TimePeriod::Offpeak,
    TimePeriod::Night};

const char* to_string(TimePeriod p);
TimePeriod period_from_string(const std::string& s);

/// Day partition used for heterogeneous effect groups. Defaults follow
/// conventional metropolitan peak definitions; ranges are half-open over
/// minute-of-day and the night range wraps midnight.
struct PeriodBins {
    int morning_start = 7 * 60, morning_end = 10 * 60;   // 07:00-09:59
    int evening_start = 17 * 60, evening_end = 20 * 60;  // 17:00-19:59
    int night_start = 23 * 60, night_end = 5 * 60;       // 23:00-04:59 (wraps)

    TimePeriod classify(Minutes t) const;
};

}  // namespace causalcast
