#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace gridres {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

enum class Meridiem { AM, PM };

/// A wall-clock time as written in the source, keeping the AM/PM marker so
/// that cleaning can reason about single-marker corrections.
struct ClockTime {
    int hour = 0;  // 1..12 when marker is set, 0..23 otherwise
    int minute = 0;
    int second = 0;
    std::optional<Meridiem> marker;

    std::chrono::seconds since_midnight() const;
    /// Same time with the AM/PM marker swapped. Requires a marker.
    ClockTime flipped() const;
};

/// Accepts "YYYY-MM-DD" and US "M/D/YYYY". Returns nullopt for anything else.
std::optional<Date> parse_date(std::string_view text);

/// Accepts "h:mm AM", "h:mm:ss PM", "HH:MM" and "HH:MM:SS" (24h).
std::optional<ClockTime> parse_clock(std::string_view text);

Timestamp combine(const Date& date, const ClockTime& clock);

/// "YYYY-MM-DDTHH:MM:SS"
std::string format_timestamp(Timestamp ts);
/// "YYYY-MM-DD"
std::string format_date(const Date& date);
/// Parses the format produced by format_timestamp.
std::optional<Timestamp> parse_timestamp(std::string_view text);

int year_of(Timestamp ts);
Date date_of(Timestamp ts);

}  // namespace gridres
