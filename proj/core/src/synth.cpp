#include "stormcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/ingest.hpp"
#include "stormcast/records.hpp"
#include "stormcast/rng.hpp"

namespace stormcast {

namespace {

constexpr double kMaxUnits = 1e6;

std::int64_t units_from_log(double log_target) {
    const double u = std::round(std::expm1(log_target));
    if (!(u > 0.0)) return 0;
    if (u > kMaxUnits) return static_cast<std::int64_t>(kMaxUnits);
    return static_cast<std::int64_t>(u);
}

int schema_index(const std::string& name) {
    const auto& schema = weather_schema();
    auto it = std::find(schema.begin(), schema.end(), name);
    if (it == schema.end()) throw ConfigError("synth: unknown weather column '" + name + "'");
    return static_cast<int>(it - schema.begin());
}

int event_index(const std::string& name) {
    const auto& cols = event_columns();
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw ConfigError("synth: unknown event column '" + name + "'");
    return static_cast<int>(it - cols.begin());
}

double event_value(const EventFeatures& ev, int index) {
    switch (index) {
        case 0: return ev.weekday;
        case 1: return ev.is_weekend;
        case 2: return ev.is_holiday;
        case 3: return ev.is_holiday_and_weekday;
        case 4: return ev.is_holiday_and_weekend;
        default: return ev.black_friday_window[static_cast<std::size_t>(index - 5)];
    }
}

void validate(const SynthSpec& spec) {
    if (spec.n_stores <= 0 || spec.n_items <= 0 || spec.n_stations <= 0)
        throw ConfigError("synth: n_stores, n_items, n_stations must be positive");
    if (spec.start > spec.end)
        throw ConfigError("synth: degenerate date range " + spec.start.to_string() + ".." +
                          spec.end.to_string());
    if (spec.informative_weather.size() != spec.weather_effects.size())
        throw ConfigError("synth: weather_effects must align with informative_weather");
    if (spec.informative_events.size() != spec.event_effects.size())
        throw ConfigError("synth: event_effects must align with informative_events");
    if (spec.noise_sd < 0) throw ConfigError("synth: noise_sd must be non-negative");
    if (spec.missing_rate < 0 || spec.missing_rate >= 1)
        throw ConfigError("synth: missing_rate must lie in [0, 1)");
    if (spec.dead_pair_rate < 0 || spec.dead_pair_rate >= 1)
        throw ConfigError("synth: dead_pair_rate must lie in [0, 1)");
    if (spec.nonlinear && spec.informative_weather.size() < 2)
        throw ConfigError("synth: nonlinear mode needs two informative weather columns");
    for (double b : spec.weather_effects)
        if (std::abs(b) < 1e-6) throw ConfigError("synth: informative effect sizes must be nonzero");
}

} // namespace

SynthPaths generate(const SynthSpec& spec, const std::string& out_dir) {
    validate(spec);
    std::filesystem::create_directories(out_dir);

    const auto& schema = weather_schema();
    const std::size_t n_cols = schema.size();
    const std::int64_t n_days = (spec.end - spec.start) + 1;

    std::vector<int> inf_weather_idx;
    for (const auto& c : spec.informative_weather) inf_weather_idx.push_back(schema_index(c));
    std::vector<int> inf_event_idx;
    for (const auto& c : spec.informative_events) inf_event_idx.push_back(event_index(c));

    Rng value_rng(mix_seed({spec.seed, 1}));
    Rng missing_rng(mix_seed({spec.seed, 2}));
    Rng sales_rng(mix_seed({spec.seed, 3}));
    Rng dead_rng(mix_seed({spec.seed, 4}));

    // Event contribution is a function of the date alone.
    std::vector<double> event_term(static_cast<std::size_t>(n_days), 0.0);
    if (!inf_event_idx.empty()) {
        for (std::int64_t t = 0; t < n_days; ++t) {
            const EventFeatures ev =
                derive_event_features(spec.start.plus_days(t), default_us_holidays());
            double s = 0.0;
            for (std::size_t k = 0; k < inf_event_idx.size(); ++k)
                s += spec.event_effects[k] * event_value(ev, inf_event_idx[k]);
            event_term[static_cast<std::size_t>(t)] = s;
        }
    }

    // Per (station, day): weather vector and the exact log-scale base target.
    std::vector<std::vector<double>> weather_values(
        static_cast<std::size_t>(spec.n_stations) * static_cast<std::size_t>(n_days));
    std::vector<double> base_log(weather_values.size(), 0.0);

    const bool absorb = !spec.nonlinear && !inf_weather_idx.empty();
    for (int st = 0; st < spec.n_stations; ++st) {
        for (std::int64_t t = 0; t < n_days; ++t) {
            std::vector<double> x(n_cols);
            for (std::size_t c = 0; c < n_cols; ++c) x[c] = value_rng.normal();

            double s = event_term[static_cast<std::size_t>(t)];
            for (std::size_t k = 0; k < inf_weather_idx.size(); ++k)
                s += spec.weather_effects[k] * x[static_cast<std::size_t>(inf_weather_idx[k])];
            if (spec.nonlinear)
                s += spec.product_beta * x[static_cast<std::size_t>(inf_weather_idx[0])] *
                     x[static_cast<std::size_t>(inf_weather_idx[1])];

            const std::int64_t u0 = units_from_log(s);
            if (absorb) {
                // Re-solve the first informative column so that the integer
                // unit count round-trips to an exactly linear log target.
                const std::size_t a = static_cast<std::size_t>(inf_weather_idx[0]);
                const double beta = spec.weather_effects[0];
                const double rest = s - beta * x[a];
                x[a] = (std::log1p(static_cast<double>(u0)) - rest) / beta;
            }
            const std::size_t cell = static_cast<std::size_t>(st) * n_days + t;
            base_log[cell] = absorb ? std::log1p(static_cast<double>(u0)) : s;
            weather_values[cell] = std::move(x);
        }
    }

    SynthPaths paths;
    const std::filesystem::path dir(out_dir);
    paths.sales = (dir / "sales.csv").string();
    paths.weather = (dir / "weather.csv").string();
    paths.key = (dir / "key.csv").string();
    paths.manifest = (dir / "manifest.txt").string();

    {
        std::ofstream key_out(paths.key, std::ios::binary);
        if (!key_out) throw DataError("cannot write " + paths.key);
        key_out << "store_nbr,station_nbr\n";
        for (int s = 1; s <= spec.n_stores; ++s)
            key_out << s << ',' << ((s - 1) % spec.n_stations + 1) << '\n';
    }

    {
        std::ofstream wout(paths.weather, std::ios::binary);
        if (!wout) throw DataError("cannot write " + paths.weather);
        wout << "station_nbr,date";
        for (const auto& c : schema) wout << ',' << c;
        wout << '\n';
        for (int st = 0; st < spec.n_stations; ++st) {
            for (std::int64_t t = 0; t < n_days; ++t) {
                const std::size_t cell = static_cast<std::size_t>(st) * n_days + t;
                wout << (st + 1) << ',' << spec.start.plus_days(t).to_string();
                for (std::size_t c = 0; c < n_cols; ++c) {
                    if (spec.missing_rate > 0 && missing_rng.uniform() < spec.missing_rate)
                        wout << ",M";
                    else
                        wout << ',' << format_double(weather_values[cell][c]);
                }
                wout << '\n';
            }
        }
    }

    {
        std::ofstream sout(paths.sales, std::ios::binary);
        if (!sout) throw DataError("cannot write " + paths.sales);
        sout << "date,store_nbr,item_nbr,units\n";
        for (int store = 1; store <= spec.n_stores; ++store) {
            const int station = (store - 1) % spec.n_stations;
            for (int item = 1; item <= spec.n_items; ++item) {
                const bool dead = dead_rng.uniform() < spec.dead_pair_rate;
                for (std::int64_t t = 0; t < n_days; ++t) {
                    std::int64_t units = 0;
                    if (!dead) {
                        const std::size_t cell = static_cast<std::size_t>(station) * n_days + t;
                        double log_target = base_log[cell];
                        if (spec.noise_sd > 0) log_target += sales_rng.normal(0, spec.noise_sd);
                        units = units_from_log(log_target);
                    }
                    sout << spec.start.plus_days(t).to_string() << ',' << store << ',' << item
                         << ',' << units << '\n';
                }
            }
        }
    }

    {
        std::ofstream mout(paths.manifest, std::ios::binary);
        if (!mout) throw DataError("cannot write " + paths.manifest);
        mout << "seed=" << spec.seed << '\n';
        mout << "mode=" << (spec.nonlinear ? "nonlinear" : "linear") << '\n';
        mout << "n_stores=" << spec.n_stores << '\n';
        mout << "n_items=" << spec.n_items << '\n';
        mout << "n_stations=" << spec.n_stations << '\n';
        mout << "start=" << spec.start.to_string() << '\n';
        mout << "end=" << spec.end.to_string() << '\n';
        mout << "noise_sd=" << format_double(spec.noise_sd) << '\n';
        mout << "missing_rate=" << format_double(spec.missing_rate) << '\n';
        mout << "dead_pair_rate=" << format_double(spec.dead_pair_rate) << '\n';
        for (std::size_t k = 0; k < spec.informative_weather.size(); ++k)
            mout << "beta." << spec.informative_weather[k] << '='
                 << format_double(spec.weather_effects[k]) << '\n';
        for (std::size_t k = 0; k < spec.informative_events.size(); ++k)
            mout << "beta." << spec.informative_events[k] << '='
                 << format_double(spec.event_effects[k]) << '\n';
        if (spec.nonlinear) {
            mout << "product.columns=" << spec.informative_weather[0] << '*'
                 << spec.informative_weather[1] << '\n';
            mout << "product.beta=" << format_double(spec.product_beta) << '\n';
        }
    }
    return paths;
}

} // namespace stormcast
