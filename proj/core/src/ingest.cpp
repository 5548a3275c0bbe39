#include "stormcast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/rng.hpp"
#include "stormcast/units.hpp"

namespace stormcast {

namespace {

std::int64_t parse_int(const CsvTable& t, std::size_t row, int col) {
    const std::string& s = t.rows[row][static_cast<std::size_t>(col)];
    std::int64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw DataError(t.path + ":" + std::to_string(t.line_numbers[row]) +
                        ": not an integer: '" + s + "'");
    return v;
}

CalendarDate parse_date(const CsvTable& t, std::size_t row, int col) {
    try {
        return CalendarDate::parse(t.rows[row][static_cast<std::size_t>(col)]);
    } catch (const DataError& e) {
        throw DataError(t.path + ":" + std::to_string(t.line_numbers[row]) + ": " + e.what());
    }
}

// Weather cell conventions from the source data: "M" and "-" mark missing
// readings, "T" is trace precipitation recorded as 0.005.
std::optional<double> parse_weather_cell(const CsvTable& t, std::size_t row, int col) {
    const std::string& s = t.rows[row][static_cast<std::size_t>(col)];
    if (s == "M" || s == "-" || s.empty()) return std::nullopt;
    if (s == "T") return 0.005;
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError(t.path + ":" + std::to_string(t.line_numbers[row]) +
                        ": bad weather value '" + s + "'");
    return v;
}

std::uint64_t pair_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

std::uint64_t station_date_key(int station, const CalendarDate& d) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(station)) << 32) ^
           static_cast<std::uint64_t>(d.serial() + 0x40000000LL);
}

} // namespace

const std::vector<std::string>& event_columns() {
    static const std::vector<std::string> cols = {
        "weekday",
        "is_weekend",
        "is_holiday",
        "is_holiday_and_weekday",
        "is_holiday_and_weekend",
        "is_blackfriday_m3",
        "is_blackfriday_m2",
        "is_blackfriday_m1",
        "is_blackfriday",
        "is_blackfriday_p1",
        "is_blackfriday_p2",
        "is_blackfriday_p3",
    };
    return cols;
}

EventFeatures derive_event_features(const CalendarDate& date, const DateSet& holidays) {
    EventFeatures ev;
    ev.weekday = date.weekday();
    ev.is_weekend = (ev.weekday == 0 || ev.weekday == 6) ? 1 : 0;
    ev.is_holiday = holidays.count(date) ? 1 : 0;
    ev.is_holiday_and_weekday = (ev.is_holiday && !ev.is_weekend) ? 1 : 0;
    ev.is_holiday_and_weekend = (ev.is_holiday && ev.is_weekend) ? 1 : 0;
    const std::int64_t offset = date - black_friday(date.year());
    if (offset >= -3 && offset <= 3) ev.black_friday_window[offset + 3] = 1;
    ev.year = date.year();
    ev.month = date.month();
    ev.day = date.day();
    return ev;
}

RawTables load_tables(const std::string& sales_path, const std::string& weather_path,
                      const std::string& key_path) {
    RawTables out;

    const CsvTable key_csv = read_csv(key_path, {"store_nbr", "station_nbr"});
    std::unordered_map<int, int> store_to_station;
    for (std::size_t i = 0; i < key_csv.rows.size(); ++i) {
        StationKey k;
        k.store = static_cast<int>(parse_int(key_csv, i, 0));
        k.station = static_cast<int>(parse_int(key_csv, i, 1));
        if (k.store <= 0 || k.station <= 0)
            throw DataError(key_path + ":" + std::to_string(key_csv.line_numbers[i]) +
                            ": ids must be positive");
        auto [it, inserted] = store_to_station.emplace(k.store, k.station);
        if (!inserted && it->second != k.station)
            throw DataError(key_path + ": store " + std::to_string(k.store) +
                            " mapped to two stations");
        if (inserted) out.key.push_back(k);
    }

    std::vector<std::string> weather_header = {"station_nbr", "date"};
    for (const auto& c : weather_schema()) weather_header.push_back(c);
    const CsvTable weather_csv = read_csv(weather_path, weather_header);
    std::unordered_set<std::uint64_t> weather_seen;
    for (std::size_t i = 0; i < weather_csv.rows.size(); ++i) {
        WeatherRecord w;
        w.station = static_cast<int>(parse_int(weather_csv, i, 0));
        w.date = parse_date(weather_csv, i, 1);
        w.values.reserve(weather_schema().size());
        for (std::size_t c = 0; c < weather_schema().size(); ++c)
            w.values.push_back(parse_weather_cell(weather_csv, i, static_cast<int>(c + 2)));
        if (!weather_seen.insert(station_date_key(w.station, w.date)).second)
            throw DataError(weather_path + ":" + std::to_string(weather_csv.line_numbers[i]) +
                            ": duplicate (date, station) row");
        out.weather.push_back(std::move(w));
    }

    const CsvTable sales_csv = read_csv(sales_path, {"date", "store_nbr", "item_nbr", "units"});
    std::unordered_map<std::uint64_t, std::unordered_set<std::int64_t>> sales_seen;
    for (std::size_t i = 0; i < sales_csv.rows.size(); ++i) {
        SalesRecord s;
        s.date = parse_date(sales_csv, i, 0);
        s.store = static_cast<int>(parse_int(sales_csv, i, 1));
        s.item = static_cast<int>(parse_int(sales_csv, i, 2));
        s.units = parse_int(sales_csv, i, 3);
        if (s.units < 0)
            throw DataError(sales_path + ":" + std::to_string(sales_csv.line_numbers[i]) +
                            ": negative units");
        if (!store_to_station.count(s.store))
            throw DataError("store " + std::to_string(s.store) + " has no station (" +
                            sales_path + ":" + std::to_string(sales_csv.line_numbers[i]) + ")");
        if (!sales_seen[pair_key(s.store, s.item)].insert(s.date.serial()).second)
            throw DataError(sales_path + ":" + std::to_string(sales_csv.line_numbers[i]) +
                            ": duplicate (date, store, item) row");
        out.sales.push_back(s);
    }

    for (const auto& s : out.sales) {
        const int station = store_to_station.at(s.store);
        if (!weather_seen.count(station_date_key(station, s.date)))
            throw DataError("no weather row for station " + std::to_string(station) + " on " +
                            s.date.to_string() + " (needed by store " + std::to_string(s.store) +
                            ")");
    }
    return out;
}

std::vector<WeatherRecord> impute_weather(const std::vector<WeatherRecord>& records) {
    const std::size_t n_cols = weather_schema().size();

    std::map<int, std::vector<std::size_t>> by_station;
    for (std::size_t i = 0; i < records.size(); ++i)
        by_station[records[i].station].push_back(i);

    std::vector<std::vector<double>> global_values(n_cols);
    for (const auto& r : records)
        for (std::size_t c = 0; c < n_cols; ++c)
            if (r.values[c]) global_values[c].push_back(*r.values[c]);

    std::vector<double> global_median(n_cols, 0.0);
    for (std::size_t c = 0; c < n_cols; ++c) {
        auto& vals = global_values[c];
        if (vals.empty())
            throw DataError("weather column '" + weather_schema()[c] +
                            "' has no value at any station; cannot impute");
        std::sort(vals.begin(), vals.end());
        const std::size_t m = vals.size();
        global_median[c] = (m % 2 == 1) ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
    }

    std::vector<WeatherRecord> out = records;
    for (auto& [station, idx] : by_station) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return records[a].date < records[b].date;
        });
        for (std::size_t c = 0; c < n_cols; ++c) {
            // Forward-fill in date order.
            std::optional<double> last;
            for (std::size_t i : idx) {
                if (out[i].values[c])
                    last = out[i].values[c];
                else if (last)
                    out[i].values[c] = last;
            }
            // Back-fill leading gaps from the first present value.
            std::optional<double> next;
            for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
                if (out[*it].values[c])
                    next = out[*it].values[c];
                else if (next)
                    out[*it].values[c] = next;
            }
            // Station never reported this column at all.
            for (std::size_t i : idx)
                if (!out[i].values[c]) out[i].values[c] = global_median[c];
        }
    }
    return out;
}

IngestResult build_feature_tables(const std::vector<SalesRecord>& sales,
                                  const std::vector<WeatherRecord>& weather,
                                  const std::vector<StationKey>& key, const DateSet& holidays,
                                  const SplitSpec& split_spec) {
    IngestResult res;
    res.stats.raw_sales_rows = sales.size();

    std::unordered_map<int, int> store_to_station;
    for (const auto& k : key) store_to_station[k.store] = k.station;

    std::unordered_map<std::uint64_t, const WeatherRecord*> weather_by_key;
    for (const auto& w : weather) {
        for (std::size_t c = 0; c < w.values.size(); ++c)
            if (!w.values[c])
                throw DataError("weather for station " + std::to_string(w.station) + " on " +
                                w.date.to_string() + " still has missing '" +
                                weather_schema()[c] + "'; run imputation first");
        weather_by_key[station_date_key(w.station, w.date)] = &w;
    }

    // Canonical row order: (store, item, date). This fixes the byte layout of
    // every downstream artifact and gives the series grouping the neural
    // variants need.
    std::vector<const SalesRecord*> ordered;
    ordered.reserve(sales.size());
    for (const auto& s : sales) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const SalesRecord* a, const SalesRecord* b) {
        if (a->store != b->store) return a->store < b->store;
        if (a->item != b->item) return a->item < b->item;
        return a->date < b->date;
    });

    std::vector<const SalesRecord*> train_rows, test_rows;
    for (const SalesRecord* s : ordered) {
        if (split_spec.in_train(s->date))
            train_rows.push_back(s);
        else if (split_spec.in_test(s->date))
            test_rows.push_back(s);
    }
    if (train_rows.empty()) throw DataError("ingest: no rows fall in the training range");
    if (test_rows.empty()) throw DataError("ingest: no rows fall in the test range");
    res.stats.train_rows_split = train_rows.size();
    res.stats.test_rows_split = test_rows.size();

    // Closure-date exclusion.
    const CalendarDate closed = store_closure_date();
    auto drop_closed = [&](std::vector<const SalesRecord*>& rows, bool record_excluded,
                           std::size_t& counter) {
        std::vector<const SalesRecord*> kept;
        kept.reserve(rows.size());
        for (const SalesRecord* s : rows) {
            if (s->date == closed) {
                ++counter;
                if (record_excluded)
                    res.excluded_test_rows.push_back(RowMeta{s->date, s->store, s->item});
            } else {
                kept.push_back(s);
            }
        }
        rows.swap(kept);
    };
    drop_closed(train_rows, false, res.stats.train_closed_removed);
    drop_closed(test_rows, true, res.stats.test_closed_removed);

    // Zero-sales pairs, decided on the training partition only.
    std::unordered_map<std::uint64_t, std::int64_t> train_units;
    for (const SalesRecord* s : train_rows) train_units[pair_key(s->store, s->item)] += s->units;
    for (const SalesRecord* s : train_rows) {
        if (train_units.at(pair_key(s->store, s->item)) == 0)
            res.zeros.insert(s->store, s->item);
    }

    auto drop_zero_pairs = [&](std::vector<const SalesRecord*>& rows, bool record_excluded,
                               std::size_t& counter) {
        std::vector<const SalesRecord*> kept;
        kept.reserve(rows.size());
        for (const SalesRecord* s : rows) {
            if (res.zeros.contains(s->store, s->item)) {
                ++counter;
                if (record_excluded)
                    res.excluded_test_rows.push_back(RowMeta{s->date, s->store, s->item});
            } else {
                kept.push_back(s);
            }
        }
        rows.swap(kept);
    };
    drop_zero_pairs(train_rows, false, res.stats.train_zero_removed);
    drop_zero_pairs(test_rows, true, res.stats.test_zero_removed);

    if (train_rows.empty())
        throw DataError("ingest: every training row was excluded by the zero rule");
    res.stats.train_rows_final = train_rows.size();
    res.stats.test_rows_final = test_rows.size();

    const auto& wcols = weather_schema();
    std::vector<std::string> dweather_cols = wcols;
    dweather_cols.insert(dweather_cols.end(), {"year", "month", "day"});
    std::vector<std::string> devent_cols = dweather_cols;
    for (const auto& c : event_columns()) devent_cols.push_back(c);

    auto build = [&](const std::vector<const SalesRecord*>& rows, bool with_events) {
        const auto& cols = with_events ? devent_cols : dweather_cols;
        Eigen::MatrixXd m(rows.size(), cols.size());
        Eigen::VectorXd t(rows.size());
        std::vector<RowMeta> meta;
        meta.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const SalesRecord* s = rows[i];
            const int station = store_to_station.at(s->store);
            auto it = weather_by_key.find(station_date_key(station, s->date));
            if (it == weather_by_key.end())
                throw DataError("no weather row for station " + std::to_string(station) +
                                " on " + s->date.to_string());
            const WeatherRecord* w = it->second;
            Eigen::Index j = 0;
            for (std::size_t c = 0; c < wcols.size(); ++c) m(i, j++) = *w->values[c];
            m(i, j++) = s->date.year();
            m(i, j++) = s->date.month();
            m(i, j++) = s->date.day();
            if (with_events) {
                const EventFeatures ev = derive_event_features(s->date, holidays);
                m(i, j++) = ev.weekday;
                m(i, j++) = ev.is_weekend;
                m(i, j++) = ev.is_holiday;
                m(i, j++) = ev.is_holiday_and_weekday;
                m(i, j++) = ev.is_holiday_and_weekend;
                for (int b = 0; b < 7; ++b) m(i, j++) = ev.black_friday_window[b];
            }
            t(static_cast<Eigen::Index>(i)) = log1p_units(s->units);
            meta.push_back(RowMeta{s->date, s->store, s->item});
        }
        return FeatureTable(cols, std::move(m), std::move(t), std::move(meta));
    };

    res.dweather_train = build(train_rows, false);
    res.devent_train = build(train_rows, true);
    // The modeled test table may be empty if the exclusion rules removed
    // every test row; those rows are still covered via excluded_test_rows.
    res.dweather_test = build(test_rows, false);
    res.devent_test = build(test_rows, true);
    return res;
}

} // namespace stormcast
