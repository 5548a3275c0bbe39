#include "stormcast/records.hpp"

namespace stormcast {

const std::vector<std::string>& weather_schema() {
    static const std::vector<std::string> schema = {
        "tmax",       "tmin",     "tavg",        "depart",      "dewpoint", "wetbulb",
        "heat",       "cool",     "snowfall",    "preciptotal", "stnpressure",
        "sealevel",   "resultspeed", "resultdir", "avgspeed",   "sunrise",  "sunset",
    };
    return schema;
}

} // namespace stormcast
