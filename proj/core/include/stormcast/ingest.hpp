#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stormcast/feature_table.hpp"
#include "stormcast/records.hpp"

namespace stormcast {

/// Calendar-derived flags for one date. weekday is 0=Sunday .. 6=Saturday;
/// black_friday_window[k] marks offset k-3 days from Black Friday.
struct EventFeatures {
    int weekday = 0;
    int is_weekend = 0;
    int is_holiday = 0;
    int is_holiday_and_weekday = 0;
    int is_holiday_and_weekend = 0;
    std::array<int, 7> black_friday_window{};
    int year = 0;
    int month = 0;
    int day = 0;
};

EventFeatures derive_event_features(const CalendarDate& date, const DateSet& holidays);

// Names of the 12 event columns appended to Dweather, in table order.
const std::vector<std::string>& event_columns();

/// (store, item) pairs whose training-partition units are all zero. O(1)
/// expected membership; derived solely from the training partition.
class ZeroSalesIndex {
public:
    void insert(int store, int item) { pairs_.insert(key(store, item)); }
    bool contains(int store, int item) const { return pairs_.count(key(store, item)) != 0; }
    std::size_t size() const { return pairs_.size(); }

private:
    static std::uint64_t key(int store, int item) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(store)) << 32) |
               static_cast<std::uint32_t>(item);
    }
    std::unordered_set<std::uint64_t> pairs_;
};

struct RawTables {
    std::vector<SalesRecord> sales;
    std::vector<WeatherRecord> weather;
    std::vector<StationKey> key;
};

// Parses and cross-validates the three input tables. Every sales store must
// appear in the key and every (date, station) a sales row needs must have a
// weather row (its fields may still be missing).
RawTables load_tables(const std::string& sales_path, const std::string& weather_path,
                      const std::string& key_path);

// Per-(station, column) forward-fill in date order, back-fill leading gaps,
// global-median fallback for stations with no reading at all. Errors when a
// column is missing everywhere.
std::vector<WeatherRecord> impute_weather(const std::vector<WeatherRecord>& records);

struct IngestStats {
    std::size_t raw_sales_rows = 0;
    std::size_t train_rows_split = 0;   // after the date split
    std::size_t test_rows_split = 0;
    std::size_t train_closed_removed = 0; // rows on the store-closure date
    std::size_t test_closed_removed = 0;
    std::size_t train_zero_removed = 0;   // rows for all-zero (store, item) pairs
    std::size_t test_zero_removed = 0;
    std::size_t train_rows_final = 0;
    std::size_t test_rows_final = 0;
};

struct IngestResult {
    FeatureTable dweather_train, dweather_test;
    FeatureTable devent_train, devent_test;
    ZeroSalesIndex zeros;
    // Test rows removed by the zero rule or the closure date; they re-enter
    // the prediction output with value exactly 0.
    std::vector<RowMeta> excluded_test_rows;
    IngestStats stats;
};

// All Walmart stores were closed on this date; every row on it is dropped
// from the tables and predicted as zero downstream.
inline CalendarDate store_closure_date() { return CalendarDate(2013, 12, 25); }

// Assembles the Dweather (weather + date parts) and Devent (Dweather + event
// flags) train/test pairs, applying the closure-date and zero-sales
// exclusions. `weather` must already be imputed.
IngestResult build_feature_tables(const std::vector<SalesRecord>& sales,
                                  const std::vector<WeatherRecord>& weather,
                                  const std::vector<StationKey>& key, const DateSet& holidays,
                                  const SplitSpec& split_spec);

} // namespace stormcast
