#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stormcast/date.hpp"

namespace stormcast {

/// Recipe for a synthetic sales/weather/key fixture with known ground truth.
/// Weather readings are unit normals; the log1p unit target is a declared
/// linear (optionally plus one product term) function of the informative
/// columns plus Normal(0, noise_sd) noise. Every column not named in an
/// informative set is generated independently of the target.
struct SynthSpec {
    std::uint64_t seed = 1;
    int n_stores = 2;
    int n_items = 3;
    int n_stations = 2;
    CalendarDate start{2012, 1, 1};
    CalendarDate end{2012, 3, 31};

    std::vector<std::string> informative_weather;
    std::vector<double> weather_effects; // aligned with informative_weather
    std::vector<std::string> informative_events;
    std::vector<double> event_effects;   // aligned with informative_events

    double noise_sd = 0.0;
    double missing_rate = 0.0;

    // Nonlinear mode adds product_beta * x_a * x_b for the first two
    // informative weather columns, defeating any purely linear fit.
    bool nonlinear = false;
    double product_beta = 0.0;

    // Fraction of (store, item) pairs whose units are identically zero,
    // exercising the zero-sales exclusion downstream.
    double dead_pair_rate = 0.0;
};

struct SynthPaths {
    std::string sales;
    std::string weather;
    std::string key;
    std::string manifest;
};

/// Writes sales.csv / weather.csv / key.csv conforming to the ingest file
/// contracts, plus manifest.txt recording the true coefficients. Output is a
/// pure function of the spec: same spec, byte-identical files.
///
/// In linear mode the first informative weather column absorbs the rounding
/// of units to integers, so after ingestion the log1p target equals the
/// declared linear form exactly (plus the drawn noise); in nonlinear mode the
/// target carries rounding error of at most half a unit.
SynthPaths generate(const SynthSpec& spec, const std::string& out_dir);

} // namespace stormcast
