#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stormcast/date.hpp"

namespace stormcast {

// The 17 numeric weather columns. The upstream dataset never enumerates its
// variables; this schema is declared once here and everything else derives
// column counts from it.
const std::vector<std::string>& weather_schema();

struct SalesRecord {
    CalendarDate date;
    int store = 0;
    int item = 0;
    std::int64_t units = 0;
};

struct WeatherRecord {
    CalendarDate date;
    int station = 0;
    // Aligned with weather_schema(); nullopt marks a missing measurement.
    std::vector<std::optional<double>> values;
};

struct StationKey {
    int store = 0;
    int station = 0;
};

} // namespace stormcast
