#include "gridres/datetime.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "gridres/text.hpp"

namespace gridres {

namespace {

bool parse_uint(std::string_view s, int& out) {
    if (s.empty() || s.size() > 4) return false;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::optional<Date> make_date(int y, int m, int d) {
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

}  // namespace

std::chrono::seconds ClockTime::since_midnight() const {
    int h = hour;
    if (marker) {
        h = hour % 12;
        if (*marker == Meridiem::PM) h += 12;
    }
    return std::chrono::hours{h} + std::chrono::minutes{minute} + std::chrono::seconds{second};
}

ClockTime ClockTime::flipped() const {
    ClockTime out = *this;
    if (marker) out.marker = (*marker == Meridiem::AM) ? Meridiem::PM : Meridiem::AM;
    return out;
}

std::optional<Date> parse_date(std::string_view text) {
    text = trim(text);
    const auto parts_dash = split(text, '-');
    if (parts_dash.size() == 3 && parts_dash[0].size() == 4) {
        int y, m, d;
        if (parts_dash[1].size() != 2 || parts_dash[2].size() != 2) return std::nullopt;
        if (!parse_uint(parts_dash[0], y) || !parse_uint(parts_dash[1], m) ||
            !parse_uint(parts_dash[2], d))
            return std::nullopt;
        return make_date(y, m, d);
    }
    const auto parts = split(text, '/');
    if (parts.size() == 3 && parts[2].size() == 4 && parts[0].size() <= 2 &&
        parts[1].size() <= 2) {
        int y, m, d;
        if (!parse_uint(parts[0], m) || !parse_uint(parts[1], d) || !parse_uint(parts[2], y))
            return std::nullopt;
        return make_date(y, m, d);
    }
    return std::nullopt;
}

std::optional<ClockTime> parse_clock(std::string_view text) {
    text = trim(text);
    ClockTime out;
    std::string_view hm = text;
    const auto space = text.find_last_of(' ');
    if (space != std::string_view::npos) {
        const std::string marker = to_upper(trim(text.substr(space + 1)));
        if (marker == "AM") {
            out.marker = Meridiem::AM;
        } else if (marker == "PM") {
            out.marker = Meridiem::PM;
        } else {
            return std::nullopt;
        }
        hm = trim(text.substr(0, space));
    }
    const auto parts = split(hm, ':');
    if (parts.size() < 2 || parts.size() > 3) return std::nullopt;
    if (parts[0].empty() || parts[0].size() > 2 || parts[1].size() != 2) return std::nullopt;
    if (!parse_uint(parts[0], out.hour) || !parse_uint(parts[1], out.minute)) return std::nullopt;
    if (parts.size() == 3) {
        if (parts[2].size() != 2 || !parse_uint(parts[2], out.second)) return std::nullopt;
    }
    if (out.minute > 59 || out.second > 59) return std::nullopt;
    if (out.marker) {
        if (out.hour < 1 || out.hour > 12) return std::nullopt;
    } else if (out.hour > 23) {
        return std::nullopt;
    }
    return out;
}

Timestamp combine(const Date& date, const ClockTime& clock) {
    return Timestamp{std::chrono::sys_days{date}} + clock.since_midnight();
}

std::string format_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

std::string format_timestamp(Timestamp ts) {
    const auto day = std::chrono::floor<std::chrono::days>(ts);
    const std::chrono::hh_mm_ss hms{ts - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d", format_date(Date{day}).c_str(),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    const auto t = text.find('T');
    if (t == std::string_view::npos) return std::nullopt;
    const auto date = parse_date(text.substr(0, t));
    const auto clock = parse_clock(text.substr(t + 1));
    if (!date || !clock || clock->marker) return std::nullopt;
    return combine(*date, *clock);
}

int year_of(Timestamp ts) { return static_cast<int>(date_of(ts).year()); }

Date date_of(Timestamp ts) { return Date{std::chrono::floor<std::chrono::days>(ts)}; }

}  // namespace gridres
