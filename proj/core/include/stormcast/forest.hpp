#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stormcast/feature_table.hpp"
#include "stormcast/tree.hpp"

namespace stormcast {

struct ForestParams {
    int mtry = 0; // features tried per split; 0 means all (bagging)
    int ntree = 50;
    int min_leaf = 5;
    std::uint64_t seed = 1;
    // false: every tree trains on rows 0..n-1 as-is (test hook). With no
    // resampling there is no OOB sample, so the report carries no OOB/
    // importance numbers.
    bool bootstrap = true;
    bool importance = true; // skip the permutation pass when not needed
};

/// Bootstrap-aggregated CART ensemble. Each tree owns an RNG stream derived
/// from (seed, tree index), so parallel and serial fits agree bit-for-bit.
class ForestModel {
public:
    ForestModel() = default;
    ForestModel(std::vector<RegressionTree> trees, std::vector<std::vector<std::size_t>> masks,
                std::vector<std::string> column_names, ForestParams params)
        : trees_(std::move(trees)),
          bootstrap_masks_(std::move(masks)),
          column_names_(std::move(column_names)),
          params_(params) {}

    const std::vector<RegressionTree>& trees() const { return trees_; }
    const std::vector<std::vector<std::size_t>>& bootstrap_masks() const {
        return bootstrap_masks_;
    }
    const std::vector<std::string>& column_names() const { return column_names_; }
    const ForestParams& params() const { return params_; }

    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& rows) const;

    void save(const std::string& path) const;
    static ForestModel load(const std::string& path);

private:
    std::vector<RegressionTree> trees_;
    std::vector<std::vector<std::size_t>> bootstrap_masks_;
    std::vector<std::string> column_names_;
    ForestParams params_;
};

/// Out-of-bag error and permutation importance. pct_inc_mse[j] is
/// 100 * (OOB MSE with column j permuted - OOB MSE) / OOB MSE, where the
/// permuted error uses each tree's own redrawn permutation of its OOB rows
/// and predictions are pooled into the ensemble OOB estimate.
/// pct_var_explained = 100 * (1 - oob_mse / var(target)).
struct ImportanceReport {
    std::vector<std::string> columns;
    std::vector<double> pct_inc_mse; // empty when importance was skipped
    double oob_mse = 0.0;
    double pct_var_explained = 0.0;
    std::size_t oob_skipped_rows = 0; // rows never out of bag (logged, not fatal)

    void save_csv(const std::string& path) const;
};

struct ForestFit {
    ForestModel model;
    ImportanceReport report;
};

ForestFit fit_forest(const FeatureTable& table, const ForestParams& params);

// Bagging: a forest with every feature available at every split.
ForestModel fit_bagging(const FeatureTable& table, int ntree, int min_leaf, std::uint64_t seed);

Eigen::VectorXd predict_forest(const ForestModel& model, const Eigen::MatrixXd& rows);

struct FeatureSelection {
    std::vector<std::string> columns; // original column order
    bool fell_back = false;           // nothing cleared the threshold; kept the top column
};

// Columns with |%IncMSE| above the threshold, preserving column order. Never
// empty: falls back to the single most important column.
FeatureSelection select_features(const ImportanceReport& report, double threshold = 1.0);

} // namespace stormcast
