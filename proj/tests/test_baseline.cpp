#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/linear.hpp"
#include "stormcast/metrics.hpp"

using namespace stormcast;

namespace {

FeatureTable column_table(const std::vector<std::string>& names, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y) {
    std::vector<RowMeta> meta(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        meta[static_cast<std::size_t>(i)] = {CalendarDate(2013, 1, 1).plus_days(i), 1, 1};
    return FeatureTable(names, x, y, meta);
}

// Steepest-descent oracle on the standardized least-squares objective.
Eigen::VectorXd gd_oracle(const Eigen::MatrixXd& xs, const Eigen::VectorXd& yc, int iters,
                          double lr) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(xs.cols());
    const double n = static_cast<double>(xs.rows());
    for (int it = 0; it < iters; ++it) {
        const Eigen::VectorXd grad = (2.0 / n) * (xs.transpose() * (xs * beta - yc));
        beta -= lr * grad;
    }
    return beta;
}

} // namespace

TEST_CASE("fits an exact line through colinear points") {
    Eigen::MatrixXd x(3, 1);
    x << 0, 1, 2;
    Eigen::VectorXd y(3);
    y << 0, 2, 4;
    const FeatureTable t = column_table({"x"}, x, y);
    const LinearModel m = fit_ols(t);
    const Eigen::VectorXd pred = m.predict(t);
    for (int i = 0; i < 3; ++i) CHECK(pred(i) == doctest::Approx(y(i)).epsilon(1e-12));
    CHECK(mse(pred, y) < 1e-20);
    CHECK(!m.used_ridge);
}

TEST_CASE("a constant column is dropped and the fit stays finite") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(40, 2);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = normal(gen);
        x(i, 1) = 7.0;
        y(i) = 1.5 * x(i, 0) + 0.1 * normal(gen);
    }
    const FeatureTable t = column_table({"x", "c"}, x, y);
    const LinearModel m = fit_ols(t);
    CHECK(m.coefficients.allFinite());
    CHECK(m.coefficients.size() == 1); // the constant column is gone
    CHECK(m.standardizer.kept_columns() == std::vector<std::string>{"x"});
}

TEST_CASE("duplicated columns trigger the ridge fallback") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(50, 2);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = normal(gen);
        x(i, 1) = x(i, 0); // perfectly collinear
        y(i) = 2.0 * x(i, 0) + 0.05 * normal(gen);
    }
    const FeatureTable t = column_table({"a", "a_copy"}, x, y);

    const LinearModel m = fit_ols(t);
    CHECK(m.used_ridge);
    CHECK(m.coefficients.allFinite());
    const Eigen::VectorXd pred = m.predict(t);
    CHECK(mse(pred, y) < 0.01);

    CHECK(testutil::throws_containing<DataError>([&] { (void)fit_ols(t, false); }, "a_copy"));
}

TEST_CASE("needs more rows than columns") {
    Eigen::MatrixXd x(3, 3);
    x.setRandom();
    Eigen::VectorXd y(3);
    y.setRandom();
    const FeatureTable t = column_table({"a", "b", "c"}, x, y);
    CHECK_THROWS_AS(fit_ols(t), DataError);
}

TEST_CASE("coefficients match a gradient-descent oracle") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(200, 5);
    Eigen::VectorXd y(200);
    const std::vector<double> beta = {1.0, -0.5, 0.25, 0.0, 2.0};
    for (int i = 0; i < 200; ++i) {
        double target = 0.0;
        for (int j = 0; j < 5; ++j) {
            x(i, j) = normal(gen);
            target += beta[static_cast<std::size_t>(j)] * x(i, j);
        }
        y(i) = target + 0.1 * normal(gen);
    }
    const FeatureTable t = column_table({"a", "b", "c", "d", "e"}, x, y);
    const LinearModel m = fit_ols(t);

    const Eigen::MatrixXd xs = m.standardizer.apply(t.rows());
    const Eigen::VectorXd yc = y.array() - y.mean();
    const Eigen::VectorXd want = gd_oracle(xs, yc, 20000, 0.05);
    for (int j = 0; j < 5; ++j)
        CHECK(m.coefficients(j) == doctest::Approx(want(j)).epsilon(1e-6));
}

TEST_CASE("ols never underperforms the mean predictor on its training data") {
    for (unsigned seed = 1; seed <= 10; ++seed) {
        const FeatureTable t = testutil::make_table(1, 80, 4, {0.7, -0.2}, 0.8, seed);
        const LinearModel m = fit_ols(t);
        const double fit_mse = mse(m.predict(t), t.target());
        const double mean = t.target().mean();
        const double var =
            (t.target().array() - mean).square().sum() / static_cast<double>(t.n_rows());
        CHECK(fit_mse <= var + 1e-12);
    }
}

TEST_CASE("adding a pure-noise column never hurts the training fit") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd x(100, 3);
        Eigen::VectorXd y(100);
        for (int i = 0; i < 100; ++i) {
            for (int j = 0; j < 3; ++j) x(i, j) = normal(gen);
            y(i) = 0.9 * x(i, 0) - 0.4 * x(i, 1) + 0.3 * normal(gen);
        }
        const FeatureTable small = column_table({"a", "b", "c"}, x.leftCols(3), y);

        Eigen::MatrixXd wide(100, 4);
        wide.leftCols(3) = x;
        for (int i = 0; i < 100; ++i) wide(i, 3) = normal(gen);
        const FeatureTable big = column_table({"a", "b", "c", "noise"}, wide, y);

        const double mse_small = mse(fit_ols(small).predict(small), y);
        const double mse_big = mse(fit_ols(big).predict(big), y);
        CHECK(mse_big <= mse_small + 1e-12);
    }
}

TEST_CASE("linear model serialization round-trips") {
    testutil::TempDir dir("linio");
    const FeatureTable t = testutil::make_table(1, 60, 3, {0.8}, 0.2, 13);
    const LinearModel m = fit_ols(t);
    const std::string path = (dir.path() / "model.txt").string();
    m.save(path);
    const LinearModel back = LinearModel::load(path);
    CHECK(testutil::bitwise_equal(back.predict(t), m.predict(t)));
    CHECK(back.intercept == m.intercept);
}
