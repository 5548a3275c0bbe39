#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stormcast/feature_table.hpp"
#include "stormcast/net.hpp"

namespace stormcast {

struct EvalRow {
    std::string model;
    std::string dataset;
    std::string phase; // "train" | "test"
    double mse = 0.0;
    double rmsle = 0.0;
    double wall_time_seconds = 0.0;
    int n_runs = 1;
    double mse_sd = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;

    const EvalRow* find(const std::string& model, const std::string& dataset,
                        const std::string& phase) const;

    // Model name of the lowest train-MSE row per dataset (MLP rows only).
    std::map<std::string, std::string> argmin_by_dataset() const;

    void save_csv(const std::string& path) const;
};

struct DatasetPair {
    std::string name;
    const FeatureTable* train = nullptr;
    const FeatureTable* test = nullptr; // may be null for train-only harnesses
};

// Seed for run `run` of `model_name` on `dataset`: every sweep cell is
// independently reproducible from the outer seed.
std::uint64_t run_seed(std::uint64_t outer_seed, const std::string& dataset,
                       const std::string& model_name, int run);

// (mse, rmsle) of log-scale predictions against a log1p target; rmsle goes
// through the unit-scale recovery with its non-negativity clamp.
std::pair<double, double> log_scale_metrics(const Eigen::VectorXd& pred_log,
                                            const Eigen::VectorXd& target_log);

struct SweepOptions {
    std::vector<int> layers = {2, 3, 4};
    std::vector<int> neurons = {20, 30, 40, 50, 60, 70, 80, 90, 100};
    int n_runs = 5;
    std::uint64_t outer_seed = 1;
    NetSpec base;        // learning rate / epochs / batch for every cell
    unsigned workers = 0;
};

// Train-phase MSE per (dataset, architecture), averaged over n_runs seeded
// runs. Cells run concurrently; row order is the deterministic cell order
// (dataset-major, then layers, then neurons).
EvalReport sweep_mlp(const std::vector<DatasetPair>& datasets, const SweepOptions& options);

struct CompareOptions {
    std::map<std::string, NetSpec> chosen_mlp; // per dataset name
    int taps = 2;
    int ntree_bagging = 50;
    int n_bagging_runs = 10;
    int min_leaf = 5;
    int n_runs = 5;
    std::uint64_t outer_seed = 1;
    unsigned workers = 0;
};

// The four-way comparison plus the OLS baseline: train and test rows for
// MLP, time-delay, recurrent, bagging, and OLS on each dataset.
EvalReport compare_models(const std::vector<DatasetPair>& datasets,
                          const CompareOptions& options);

// Aligned-column renderings of the two harness tables.
std::string render_sweep_text(const EvalReport& report);
std::string render_compare_text(const EvalReport& report);

} // namespace stormcast
