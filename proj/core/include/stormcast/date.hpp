#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>

namespace stormcast {

/// A Gregorian calendar date. Construction validates the (y, m, d) triple;
/// ordering and arithmetic go through a days-since-epoch serial number.
/// There is no timezone concept; all data in this project is daily.
class CalendarDate {
public:
    CalendarDate() = default;
    CalendarDate(int year, int month, int day);

    static CalendarDate parse(std::string_view iso);          // "YYYY-MM-DD"
    static CalendarDate from_serial(std::int64_t days);

    int year() const { return year_; }
    int month() const { return month_; }
    int day() const { return day_; }

    std::string to_string() const;

    // Days since 1970-01-01.
    std::int64_t serial() const { return serial_; }

    // 0 = Sunday .. 6 = Saturday.
    int weekday() const;

    CalendarDate plus_days(std::int64_t n) const { return from_serial(serial_ + n); }

    friend std::int64_t operator-(const CalendarDate& a, const CalendarDate& b) {
        return a.serial_ - b.serial_;
    }

    auto operator<=>(const CalendarDate& o) const { return serial_ <=> o.serial_; }
    bool operator==(const CalendarDate& o) const { return serial_ == o.serial_; }

private:
    int year_ = 1970;
    int month_ = 1;
    int day_ = 1;
    std::int64_t serial_ = 0;
};

using DateSet = std::set<CalendarDate>;

// Day after the fourth Thursday of November.
CalendarDate black_friday(int year);

// Fixed table of US federal holidays 2012-2014 (actual dates, not observed
// substitutes). Black Friday is intentionally absent: it is represented by
// the dedicated window flags, not by is_holiday.
const DateSet& default_us_holidays();

// One ISO date per line; blank lines and "#" comments allowed.
DateSet load_holidays(const std::string& path);

} // namespace stormcast
