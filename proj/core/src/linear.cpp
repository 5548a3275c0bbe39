#include "stormcast/linear.hpp"

#include <charconv>
#include <fstream>
#include <iostream>

#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"

namespace stormcast {

Eigen::VectorXd LinearModel::predict(const FeatureTable& table) const {
    if (table.column_names() != standardizer.input_columns())
        throw DataError("linear predict: column schema mismatch");
    const Eigen::MatrixXd xs = standardizer.apply(table.rows());
    return (xs * coefficients).array() + intercept;
}

LinearModel fit_ols(const FeatureTable& table, bool allow_ridge) {
    const std::size_t n = table.n_rows();
    LinearModel m;
    m.standardizer = Standardizer::fit(table);
    const Eigen::MatrixXd xs = m.standardizer.apply(table.rows());
    const Eigen::Index d = xs.cols();
    if (n <= static_cast<std::size_t>(d))
        throw DataError("ols: need more rows than columns (" + std::to_string(n) + " rows, " +
                        std::to_string(d) + " columns)");

    const Eigen::VectorXd& y = table.target();
    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd gram = xs.transpose() * xs;
    const Eigen::VectorXd rhs = xs.transpose() * yc;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    if (qr.rank() < d) {
        if (!allow_ridge) {
            // The pivots beyond the numerical rank point at the columns that
            // are linear combinations of the others.
            std::string cols;
            const auto& perm = qr.colsPermutation().indices();
            for (Eigen::Index k = qr.rank(); k < d; ++k) {
                const auto& name =
                    m.standardizer.kept_columns()[static_cast<std::size_t>(perm(k))];
                cols += (cols.empty() ? "" : ",") + name;
            }
            throw DataError("ols: design matrix is rank deficient (collinear columns: " + cols +
                            ") and ridge fallback is disabled");
        }
        const double lambda = 1e-8 * gram.trace() / static_cast<double>(d);
        gram.diagonal().array() += lambda;
        m.used_ridge = true;
        std::cerr << "[stormcast] ols: rank-deficient design; ridge fallback (lambda="
                  << lambda << ")\n";
    }

    m.coefficients = gram.ldlt().solve(rhs);
    m.intercept = y_mean;
    if (!m.coefficients.allFinite())
        throw DataError("ols: solver produced non-finite coefficients");
    return m;
}

void LinearModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "stormcast-linear 1\n";
    const auto& cols = standardizer.input_columns();
    out << "std_inputs " << cols.size();
    for (const auto& c : cols) out << ' ' << c;
    out << '\n';
    out << "std_kept " << standardizer.kept_indices().size();
    for (int k : standardizer.kept_indices()) out << ' ' << k;
    out << '\n';
    out << "std_mean";
    for (double v : standardizer.means()) out << ' ' << format_double(v);
    out << '\n';
    out << "std_sd";
    for (double v : standardizer.sds()) out << ' ' << format_double(v);
    out << '\n';
    out << "coef " << coefficients.size();
    for (Eigen::Index i = 0; i < coefficients.size(); ++i)
        out << ' ' << format_double(coefficients(i));
    out << '\n';
    out << "intercept " << format_double(intercept) << '\n';
    out << "used_ridge " << (used_ridge ? 1 : 0) << '\n';
}

LinearModel LinearModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "stormcast-linear 1")
        throw DataError(path + ": not a stormcast linear model (bad header)");

    auto read_num = [&](std::ifstream& s) {
        std::string w;
        if (!(s >> w)) throw DataError(path + ": truncated model file");
        double v = 0.0;
        auto r = std::from_chars(w.data(), w.data() + w.size(), v);
        if (r.ec != std::errc{}) throw DataError(path + ": bad number '" + w + "'");
        return v;
    };

    std::string word;
    std::size_t n_inputs = 0;
    in >> word >> n_inputs;
    if (word != "std_inputs") throw DataError(path + ": malformed model file");
    std::vector<std::string> input_cols(n_inputs);
    for (auto& c : input_cols) in >> c;

    std::size_t n_kept = 0;
    in >> word >> n_kept;
    if (word != "std_kept") throw DataError(path + ": malformed model file");
    std::vector<int> kept(n_kept);
    for (auto& k : kept) in >> k;

    in >> word;
    if (word != "std_mean") throw DataError(path + ": malformed model file");
    std::vector<double> mean(n_kept);
    for (auto& v : mean) v = read_num(in);
    in >> word;
    if (word != "std_sd") throw DataError(path + ": malformed model file");
    std::vector<double> sd(n_kept);
    for (auto& v : sd) v = read_num(in);

    LinearModel m;
    m.standardizer = Standardizer::restore(std::move(input_cols), std::move(kept),
                                           std::move(mean), std::move(sd));

    Eigen::Index n_coef = 0;
    in >> word >> n_coef;
    if (word != "coef") throw DataError(path + ": malformed model file");
    m.coefficients.resize(n_coef);
    for (Eigen::Index i = 0; i < n_coef; ++i) m.coefficients(i) = read_num(in);

    in >> word;
    if (word != "intercept") throw DataError(path + ": malformed model file");
    m.intercept = read_num(in);
    int ridge = 0;
    in >> word >> ridge;
    if (word != "used_ridge") throw DataError(path + ": malformed model file");
    m.used_ridge = ridge != 0;
    if (!in) throw DataError(path + ": truncated model file");
    return m;
}

} // namespace stormcast
