#include "stormcast/feature_table.hpp"

#include <set>

#include "stormcast/errors.hpp"

namespace stormcast {

FeatureTable::FeatureTable(std::vector<std::string> column_names, Eigen::MatrixXd rows,
                           Eigen::VectorXd target, std::vector<RowMeta> meta)
    : column_names_(std::move(column_names)),
      rows_(std::move(rows)),
      target_(std::move(target)),
      meta_(std::move(meta)) {
    if (rows_.cols() != static_cast<Eigen::Index>(column_names_.size()))
        throw DataError("feature table: column count mismatch");
    if (rows_.rows() != target_.size() || meta_.size() != static_cast<std::size_t>(rows_.rows()))
        throw DataError("feature table: row count mismatch");
    std::set<std::string> seen;
    for (const auto& c : column_names_)
        if (!seen.insert(c).second)
            throw DataError("feature table: duplicate column name '" + c + "'");
}

int FeatureTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < column_names_.size(); ++i)
        if (column_names_[i] == name) return static_cast<int>(i);
    return -1;
}

FeatureTable FeatureTable::select_rows(const std::vector<std::size_t>& idx) const {
    Eigen::MatrixXd r(idx.size(), rows_.cols());
    Eigen::VectorXd t(idx.size());
    std::vector<RowMeta> m;
    m.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        r.row(static_cast<Eigen::Index>(k)) = rows_.row(static_cast<Eigen::Index>(idx[k]));
        t(static_cast<Eigen::Index>(k)) = target_(static_cast<Eigen::Index>(idx[k]));
        m.push_back(meta_[idx[k]]);
    }
    return FeatureTable(column_names_, std::move(r), std::move(t), std::move(m));
}

FeatureTable FeatureTable::select_columns(const std::vector<std::string>& names) const {
    Eigen::MatrixXd r(rows_.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
        int j = column_index(names[k]);
        if (j < 0) throw DataError("feature table: no column named '" + names[k] + "'");
        r.col(static_cast<Eigen::Index>(k)) = rows_.col(j);
    }
    return FeatureTable(names, std::move(r), target_, meta_);
}

SplitSpec::SplitSpec(CalendarDate tr_start, CalendarDate tr_end, CalendarDate te_start,
                     CalendarDate te_end)
    : train_start(tr_start), train_end(tr_end), test_start(te_start), test_end(te_end) {
    if (train_start > train_end)
        throw ConfigError("split: empty training range " + train_start.to_string() + ".." +
                          train_end.to_string());
    if (test_start > test_end)
        throw ConfigError("split: empty test range " + test_start.to_string() + ".." +
                          test_end.to_string());
    if (!(train_end < test_start))
        throw ConfigError("split: train_end " + train_end.to_string() +
                          " must precede test_start " + test_start.to_string());
}

std::pair<FeatureTable, FeatureTable> split(const FeatureTable& table, const SplitSpec& spec) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        const CalendarDate& d = table.meta()[i].date;
        if (spec.in_train(d))
            train_idx.push_back(i);
        else if (spec.in_test(d))
            test_idx.push_back(i);
    }
    if (train_idx.empty()) throw DataError("split: no rows fall in the training range");
    if (test_idx.empty()) throw DataError("split: no rows fall in the test range");
    return {table.select_rows(train_idx), table.select_rows(test_idx)};
}

} // namespace stormcast
