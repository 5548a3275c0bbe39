#include "stormcast/standardize.hpp"

#include <cmath>
#include <iostream>

#include "stormcast/errors.hpp"

namespace stormcast {

Standardizer Standardizer::fit(const FeatureTable& table) {
    if (table.n_rows() == 0) throw DataError("standardize: empty table");
    Standardizer s;
    s.input_columns_ = table.column_names();
    const Eigen::MatrixXd& x = table.rows();
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double var = (x.col(j).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
            std::cerr << "[stormcast] standardize: dropping constant column '"
                      << s.input_columns_[static_cast<std::size_t>(j)] << "'\n";
            continue;
        }
        s.kept_.push_back(static_cast<int>(j));
        s.kept_columns_.push_back(s.input_columns_[static_cast<std::size_t>(j)]);
        s.mean_.push_back(mean);
        s.sd_.push_back(sd);
    }
    if (s.kept_.empty()) throw DataError("standardize: every column is constant");
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != static_cast<Eigen::Index>(input_columns_.size()))
        throw DataError("standardize: expected " + std::to_string(input_columns_.size()) +
                        " columns, got " + std::to_string(rows.cols()));
    Eigen::MatrixXd out(rows.rows(), static_cast<Eigen::Index>(kept_.size()));
    for (std::size_t k = 0; k < kept_.size(); ++k)
        out.col(static_cast<Eigen::Index>(k)) =
            (rows.col(kept_[k]).array() - mean_[k]) / sd_[k];
    return out;
}

Standardizer Standardizer::restore(std::vector<std::string> input_columns, std::vector<int> kept,
                                   std::vector<double> mean, std::vector<double> sd) {
    Standardizer s;
    s.input_columns_ = std::move(input_columns);
    s.kept_ = std::move(kept);
    s.mean_ = std::move(mean);
    s.sd_ = std::move(sd);
    for (int j : s.kept_) s.kept_columns_.push_back(s.input_columns_[static_cast<std::size_t>(j)]);
    return s;
}

} // namespace stormcast
