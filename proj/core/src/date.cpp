#include "stormcast/date.hpp"

#include <charconv>
#include <chrono>
#include <fstream>

#include "stormcast/errors.hpp"

namespace stormcast {

namespace {

std::chrono::year_month_day to_ymd(int y, int m, int d) {
    return std::chrono::year_month_day{std::chrono::year{y},
                                       std::chrono::month{static_cast<unsigned>(m)},
                                       std::chrono::day{static_cast<unsigned>(d)}};
}

} // namespace

CalendarDate::CalendarDate(int year, int month, int day)
    : year_(year), month_(month), day_(day) {
    const auto ymd = to_ymd(year, month, day);
    if (!ymd.ok())
        throw DataError("invalid calendar date: " + std::to_string(year) + "-" +
                        std::to_string(month) + "-" + std::to_string(day));
    serial_ = std::chrono::sys_days{ymd}.time_since_epoch().count();
}

CalendarDate CalendarDate::parse(std::string_view iso) {
    int y = 0, m = 0, d = 0;
    const char* p = iso.data();
    const char* end = p + iso.size();
    auto r1 = std::from_chars(p, end, y);
    if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != '-')
        throw DataError("malformed date: '" + std::string(iso) + "'");
    auto r2 = std::from_chars(r1.ptr + 1, end, m);
    if (r2.ec != std::errc{} || r2.ptr == end || *r2.ptr != '-')
        throw DataError("malformed date: '" + std::string(iso) + "'");
    auto r3 = std::from_chars(r2.ptr + 1, end, d);
    if (r3.ec != std::errc{} || r3.ptr != end)
        throw DataError("malformed date: '" + std::string(iso) + "'");
    return CalendarDate(y, m, d);
}

CalendarDate CalendarDate::from_serial(std::int64_t days) {
    const std::chrono::sys_days sd{std::chrono::days{days}};
    const std::chrono::year_month_day ymd{sd};
    CalendarDate out;
    out.year_ = static_cast<int>(ymd.year());
    out.month_ = static_cast<int>(static_cast<unsigned>(ymd.month()));
    out.day_ = static_cast<int>(static_cast<unsigned>(ymd.day()));
    out.serial_ = days;
    return out;
}

std::string CalendarDate::to_string() const {
    char buf[11];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year_, month_, day_);
    return std::string(buf);
}

int CalendarDate::weekday() const {
    const std::chrono::sys_days sd{std::chrono::days{serial_}};
    return static_cast<int>(std::chrono::weekday{sd}.c_encoding());
}

CalendarDate black_friday(int year) {
    // Fourth Thursday of November, plus one day.
    CalendarDate nov1(year, 11, 1);
    const int thursday = 4;
    int offset = (thursday - nov1.weekday() + 7) % 7;
    return nov1.plus_days(offset + 21 + 1);
}

const DateSet& default_us_holidays() {
    static const DateSet holidays = [] {
        DateSet h;
        const char* dates[] = {
            // 2012
            "2012-01-01", "2012-01-16", "2012-02-20", "2012-05-28", "2012-07-04",
            "2012-09-03", "2012-10-08", "2012-11-11", "2012-11-22", "2012-12-25",
            // 2013
            "2013-01-01", "2013-01-21", "2013-02-18", "2013-05-27", "2013-07-04",
            "2013-09-02", "2013-10-14", "2013-11-11", "2013-11-28", "2013-12-25",
            // 2014
            "2014-01-01", "2014-01-20", "2014-02-17", "2014-05-26", "2014-07-04",
            "2014-09-01", "2014-10-13", "2014-11-11", "2014-11-27", "2014-12-25",
        };
        for (const char* s : dates) h.insert(CalendarDate::parse(s));
        return h;
    }();
    return holidays;
}

DateSet load_holidays(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open holiday file: " + path);
    DateSet out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        try {
            out.insert(CalendarDate::parse(std::string_view(line).substr(start)));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace stormcast
