#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "stormcast/date.hpp"

namespace stormcast {

struct RowMeta {
    CalendarDate date;
    int store = 0;
    int item = 0;
};

/// Dense numeric design matrix with named columns, a row-aligned log1p(units)
/// target, and per-row (date, store, item) metadata. Immutable by convention
/// once built; every accessor is const and mutation happens only in builders.
class FeatureTable {
public:
    FeatureTable() = default;
    FeatureTable(std::vector<std::string> column_names, Eigen::MatrixXd rows,
                 Eigen::VectorXd target, std::vector<RowMeta> meta);

    std::size_t n_rows() const { return static_cast<std::size_t>(rows_.rows()); }
    std::size_t n_cols() const { return static_cast<std::size_t>(rows_.cols()); }

    const std::vector<std::string>& column_names() const { return column_names_; }
    const Eigen::MatrixXd& rows() const { return rows_; }
    const Eigen::VectorXd& target() const { return target_; }
    const std::vector<RowMeta>& meta() const { return meta_; }

    // -1 when absent.
    int column_index(const std::string& name) const;

    // New table with the given subset of rows, in the given order.
    FeatureTable select_rows(const std::vector<std::size_t>& idx) const;

    // New table keeping only the named columns, in the order given.
    FeatureTable select_columns(const std::vector<std::string>& names) const;

private:
    std::vector<std::string> column_names_;
    Eigen::MatrixXd rows_;
    Eigen::VectorXd target_;
    std::vector<RowMeta> meta_;
};

/// Train/test date ranges; both closed intervals. train_end < test_start is
/// enforced at construction.
struct SplitSpec {
    CalendarDate train_start, train_end, test_start, test_end;

    SplitSpec(CalendarDate tr_start, CalendarDate tr_end, CalendarDate te_start,
              CalendarDate te_end);

    bool in_train(const CalendarDate& d) const { return d >= train_start && d <= train_end; }
    bool in_test(const CalendarDate& d) const { return d >= test_start && d <= test_end; }
};

// Partition by date; rows outside both ranges are dropped. Errors if either
// partition comes out empty.
std::pair<FeatureTable, FeatureTable> split(const FeatureTable& table, const SplitSpec& spec);

} // namespace stormcast
