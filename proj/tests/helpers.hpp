#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "stormcast/feature_table.hpp"
#include "stormcast/ingest.hpp"
#include "stormcast/synth.hpp"

namespace testutil {

// Exact (bitwise) equality for Eigen values; Eigen's operator== is
// coefficient-wise so it cannot be fed to CHECK directly.
inline bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

// Asserts fn() throws E with `needle` somewhere in the message.
template <typename E, typename F>
bool throws_containing(F&& fn, const std::string& needle) {
    try {
        fn();
    } catch (const E& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    } catch (...) {
        return false;
    }
    return false;
}

// Self-deleting scratch directory under the system temp root.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("stormcast_test_" + tag + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

// One (store, item) series per (store, item) pair with iid standard-normal
// features; target = coefficients . x + noise. For direct table construction
// without the CSV round trip.
inline stormcast::FeatureTable make_table(int n_series, int len, int d,
                                          const std::vector<double>& coefficients,
                                          double noise_sd, unsigned seed) {
    const int n = n_series * len;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    std::vector<stormcast::RowMeta> meta(n);
    const stormcast::CalendarDate start(2013, 1, 1);
    int row = 0;
    for (int s = 0; s < n_series; ++s) {
        for (int t = 0; t < len; ++t, ++row) {
            double target = 0.0;
            for (int j = 0; j < d; ++j) {
                x(row, j) = normal(gen);
                if (j < static_cast<int>(coefficients.size()))
                    target += coefficients[static_cast<std::size_t>(j)] * x(row, j);
            }
            if (noise_sd > 0) target += noise_sd * normal(gen);
            y(row) = target;
            meta[static_cast<std::size_t>(row)] = {start.plus_days(t), s + 1, 1};
        }
    }
    std::vector<std::string> cols;
    for (int j = 0; j < d; ++j) cols.push_back("f" + std::to_string(j));
    return stormcast::FeatureTable(cols, std::move(x), std::move(y), std::move(meta));
}

// Generate a synthetic fixture, push it through the full ingestion path, and
// hand back the result.
inline stormcast::IngestResult ingest_synth(const stormcast::SynthSpec& spec,
                                            const stormcast::SplitSpec& split,
                                            const std::string& dir) {
    const auto paths = stormcast::generate(spec, dir);
    auto raw = stormcast::load_tables(paths.sales, paths.weather, paths.key);
    raw.weather = stormcast::impute_weather(raw.weather);
    return stormcast::build_feature_tables(raw.sales, raw.weather, raw.key,
                                           stormcast::default_us_holidays(), split);
}

} // namespace testutil
