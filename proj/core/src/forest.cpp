#include "stormcast/forest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/parallel.hpp"

namespace stormcast {

double ForestModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict(x);
    return sum / static_cast<double>(trees_.size());
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& rows) const {
    Eigen::VectorXd out(rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) out(i) = predict_row(rows.row(i));
    return out;
}

Eigen::VectorXd predict_forest(const ForestModel& model, const Eigen::MatrixXd& rows) {
    return model.predict(rows);
}

ForestFit fit_forest(const FeatureTable& table, const ForestParams& params) {
    const std::size_t n = table.n_rows();
    const int d = static_cast<int>(table.n_cols());
    if (n == 0) throw DataError("forest: empty table");
    if (params.ntree <= 0) throw ConfigError("forest: ntree must be positive");
    if (params.mtry > d) throw ConfigError("forest: mtry exceeds column count");
    if (params.min_leaf <= 0) throw ConfigError("forest: min_leaf must be positive");

    const Eigen::VectorXd& y = table.target();
    const double y_mean = y.mean();
    const double y_var = (y.array() - y_mean).square().sum() / static_cast<double>(n);
    if (!(y_var > 0.0)) throw DataError("forest: target is constant");

    const std::size_t ntree = static_cast<std::size_t>(params.ntree);
    std::vector<RegressionTree> trees(ntree);
    std::vector<std::vector<std::size_t>> masks(ntree);

    const TreeParams tree_params{params.mtry, params.min_leaf};
    parallel_for(ntree, [&](std::size_t t) {
        Rng rng(mix_seed({params.seed, 101, t}));
        std::vector<std::size_t> mask(n);
        if (params.bootstrap) {
            for (std::size_t i = 0; i < n; ++i) mask[i] = static_cast<std::size_t>(rng.below(n));
        } else {
            for (std::size_t i = 0; i < n; ++i) mask[i] = i;
        }
        trees[t] = fit_tree(table.rows(), y, mask, tree_params, rng);
        masks[t] = std::move(mask);
    });

    // The no-resampling hook trains every tree on the full data; there is no
    // out-of-bag sample to score, so the report carries no OOB numbers.
    if (!params.bootstrap) {
        ImportanceReport report;
        report.columns = table.column_names();
        report.oob_skipped_rows = n;
        return ForestFit{
            ForestModel(std::move(trees), std::move(masks), table.column_names(), params),
            std::move(report)};
    }

    // Out-of-bag bookkeeping, aggregated in tree order for determinism.
    std::vector<std::vector<std::uint32_t>> oob_rows(ntree);
    std::vector<double> oob_sum(n, 0.0);
    std::vector<std::uint32_t> oob_count(n, 0);
    {
        std::vector<char> in_bag(n);
        for (std::size_t t = 0; t < ntree; ++t) {
            std::fill(in_bag.begin(), in_bag.end(), 0);
            for (std::size_t i : masks[t]) in_bag[i] = 1;
            for (std::size_t i = 0; i < n; ++i) {
                if (in_bag[i]) continue;
                oob_rows[t].push_back(static_cast<std::uint32_t>(i));
                oob_sum[i] += trees[t].predict(table.rows().row(static_cast<Eigen::Index>(i)));
                ++oob_count[i];
            }
        }
    }

    std::size_t covered = 0;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (oob_count[i] == 0) continue;
        ++covered;
        const double err = oob_sum[i] / oob_count[i] - y(static_cast<Eigen::Index>(i));
        sse += err * err;
    }
    if (covered == 0)
        throw DataError("forest: no row was ever out of bag; increase ntree");
    const std::size_t skipped = n - covered;
    if (skipped > 0)
        std::cerr << "[stormcast] forest: " << skipped
                  << " row(s) had no out-of-bag tree and were skipped in the OOB error\n";

    ImportanceReport report;
    report.columns = table.column_names();
    report.oob_mse = sse / static_cast<double>(covered);
    report.pct_var_explained = 100.0 * (1.0 - report.oob_mse / y_var);
    report.oob_skipped_rows = skipped;

    if (params.importance) {
        report.pct_inc_mse.assign(static_cast<std::size_t>(d), 0.0);
        parallel_for(static_cast<std::size_t>(d), [&](std::size_t j) {
            std::vector<double> perm_sum(n, 0.0);
            std::vector<std::uint32_t> perm(n);
            for (std::size_t t = 0; t < ntree; ++t) {
                const auto& oob = oob_rows[t];
                if (oob.empty()) continue;
                Rng rng(mix_seed({params.seed, 202, t, j}));
                const std::size_t m = oob.size();
                for (std::size_t k = 0; k < m; ++k) perm[k] = oob[k];
                for (std::size_t k = m; k > 1; --k)
                    std::swap(perm[k - 1], perm[static_cast<std::size_t>(rng.below(k))]);
                for (std::size_t k = 0; k < m; ++k) {
                    const std::size_t i = oob[k];
                    const double v =
                        table.rows()(static_cast<Eigen::Index>(perm[k]), static_cast<Eigen::Index>(j));
                    perm_sum[i] += trees[t].predict_with_override(
                        table.rows(), static_cast<Eigen::Index>(i), static_cast<int>(j), v);
                }
            }
            double perm_sse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (oob_count[i] == 0) continue;
                const double err = perm_sum[i] / oob_count[i] - y(static_cast<Eigen::Index>(i));
                perm_sse += err * err;
            }
            const double perm_mse = perm_sse / static_cast<double>(covered);
            report.pct_inc_mse[j] =
                report.oob_mse > 0.0
                    ? 100.0 * (perm_mse - report.oob_mse) / report.oob_mse
                    : 0.0;
        });
    }

    return ForestFit{ForestModel(std::move(trees), std::move(masks), table.column_names(), params),
                     std::move(report)};
}

ForestModel fit_bagging(const FeatureTable& table, int ntree, int min_leaf, std::uint64_t seed) {
    ForestParams params;
    params.mtry = 0; // every feature available at every split
    params.ntree = ntree;
    params.min_leaf = min_leaf;
    params.seed = seed;
    params.importance = false;
    return fit_forest(table, params).model;
}

FeatureSelection select_features(const ImportanceReport& report, double threshold) {
    if (report.pct_inc_mse.size() != report.columns.size())
        throw DataError("select_features: report has no importance values");
    FeatureSelection sel;
    for (std::size_t j = 0; j < report.columns.size(); ++j)
        if (std::abs(report.pct_inc_mse[j]) > threshold) sel.columns.push_back(report.columns[j]);
    if (sel.columns.empty()) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < report.pct_inc_mse.size(); ++j)
            if (std::abs(report.pct_inc_mse[j]) > std::abs(report.pct_inc_mse[best])) best = j;
        sel.columns.push_back(report.columns[best]);
        sel.fell_back = true;
        std::cerr << "[stormcast] select_features: no column cleared |%IncMSE| > " << threshold
                  << "; keeping '" << report.columns[best] << "'\n";
    }
    return sel;
}

void ImportanceReport::save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "feature,pct_inc_mse\n";
    for (std::size_t j = 0; j < columns.size(); ++j)
        out << columns[j] << ',' << format_double(pct_inc_mse.empty() ? 0.0 : pct_inc_mse[j])
            << '\n';
}

namespace {

constexpr const char* kForestMagic = "stormcast-forest 1";

} // namespace

void ForestModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << kForestMagic << '\n';
    out << "columns " << column_names_.size();
    for (const auto& c : column_names_) out << ' ' << c;
    out << '\n';
    out << "params " << params_.mtry << ' ' << params_.ntree << ' ' << params_.min_leaf << ' '
        << params_.seed << ' ' << (params_.bootstrap ? 1 : 0) << '\n';
    out << "trees " << trees_.size() << '\n';
    for (const auto& tree : trees_) {
        out << "tree " << tree.nodes().size() << '\n';
        for (const auto& n : tree.nodes())
            out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' '
                << n.right << ' ' << format_double(n.value) << '\n';
    }
}

ForestModel ForestModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kForestMagic)
        throw DataError(path + ": not a stormcast forest model (bad header)");

    std::string word;
    std::size_t n_cols = 0;
    in >> word >> n_cols;
    if (word != "columns") throw DataError(path + ": malformed model file");
    std::vector<std::string> cols(n_cols);
    for (auto& c : cols) in >> c;

    ForestParams params;
    int bootstrap = 1;
    in >> word >> params.mtry >> params.ntree >> params.min_leaf >> params.seed >> bootstrap;
    if (word != "params") throw DataError(path + ": malformed model file");
    params.bootstrap = bootstrap != 0;

    std::size_t ntree = 0;
    in >> word >> ntree;
    if (word != "trees") throw DataError(path + ": malformed model file");

    std::vector<RegressionTree> trees(ntree);
    for (std::size_t t = 0; t < ntree; ++t) {
        std::size_t n_nodes = 0;
        in >> word >> n_nodes;
        if (word != "tree") throw DataError(path + ": malformed model file");
        auto& nodes = trees[t].nodes();
        nodes.resize(n_nodes);
        for (auto& n : nodes) {
            std::string thr, val;
            in >> n.feature >> thr >> n.left >> n.right >> val;
            auto parse = [&](const std::string& s) {
                double v = 0.0;
                auto r = std::from_chars(s.data(), s.data() + s.size(), v);
                if (r.ec != std::errc{}) throw DataError(path + ": bad number in model file");
                return v;
            };
            n.threshold = parse(thr);
            n.value = parse(val);
        }
    }
    if (!in) throw DataError(path + ": truncated model file");
    return ForestModel(std::move(trees), {}, std::move(cols), params);
}

} // namespace stormcast
