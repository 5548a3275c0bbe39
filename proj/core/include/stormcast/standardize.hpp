#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stormcast/feature_table.hpp"

namespace stormcast {

/// Per-column z-scoring with parameters fit on the training table and applied
/// unchanged to test data. Constant columns cannot be scaled and are dropped
/// with a warning; the drop mask travels with the model.
class Standardizer {
public:
    Standardizer() = default;

    static Standardizer fit(const FeatureTable& table);

    // rows must have one column per original input column.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;

    const std::vector<std::string>& input_columns() const { return input_columns_; }
    const std::vector<std::string>& kept_columns() const { return kept_columns_; }
    std::size_t n_kept() const { return kept_.size(); }

    const std::vector<int>& kept_indices() const { return kept_; }
    const std::vector<double>& means() const { return mean_; }  // per kept column
    const std::vector<double>& sds() const { return sd_; }      // per kept column

    // Used by model deserialization.
    static Standardizer restore(std::vector<std::string> input_columns, std::vector<int> kept,
                                std::vector<double> mean, std::vector<double> sd);

private:
    std::vector<std::string> input_columns_;
    std::vector<std::string> kept_columns_;
    std::vector<int> kept_;
    std::vector<double> mean_;
    std::vector<double> sd_;
};

} // namespace stormcast
