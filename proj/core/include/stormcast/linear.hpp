#pragma once

#include <Eigen/Dense>
#include <string>

#include "stormcast/feature_table.hpp"
#include "stormcast/standardize.hpp"

namespace stormcast {

/// Ordinary-least-squares baseline on standardized columns. Coefficients are
/// indexed against the standardizer's kept columns; the intercept soaks up
/// the target mean (standardized columns are centered).
struct LinearModel {
    Standardizer standardizer;
    Eigen::VectorXd coefficients; // per kept column
    double intercept = 0.0;
    bool used_ridge = false;

    Eigen::VectorXd predict(const FeatureTable& table) const;

    void save(const std::string& path) const;
    static LinearModel load(const std::string& path);
};

/// Normal-equations fit. On detected rank deficiency a ridge term
/// lambda = 1e-8 * trace(X'X)/d is added; with allow_ridge = false the fit
/// fails instead, listing the dependent columns.
LinearModel fit_ols(const FeatureTable& table, bool allow_ridge = true);

} // namespace stormcast
