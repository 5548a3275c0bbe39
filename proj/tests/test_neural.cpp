#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/net.hpp"

using namespace stormcast;

namespace {

// Hand-buildable model: `widths` lists hidden layer sizes; all weights come
// from the supplied generator.
NetModel make_model(int input, const std::vector<int>& widths, std::mt19937_64& gen) {
    std::normal_distribution<double> normal(0.0, 0.5);
    NetModel m;
    int prev = input;
    for (int w : widths) {
        Eigen::MatrixXd W(w, prev);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = normal(gen);
        m.weights.push_back(W);
        Eigen::VectorXd b(w);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = normal(gen);
        m.biases.push_back(b);
        prev = w;
    }
    Eigen::MatrixXd Wout(1, prev);
    for (Eigen::Index j = 0; j < Wout.cols(); ++j) Wout(0, j) = normal(gen);
    m.weights.push_back(Wout);
    m.biases.push_back(Eigen::VectorXd::Zero(1));
    return m;
}

// Scalar-loop forward pass, written independently of the library path.
double oracle_forward(const NetModel& m, const Eigen::VectorXd& x) {
    std::vector<double> act(x.data(), x.data() + x.size());
    for (std::size_t l = 0; l + 1 < m.weights.size(); ++l) {
        std::vector<double> next(static_cast<std::size_t>(m.weights[l].rows()));
        for (std::size_t i = 0; i < next.size(); ++i) {
            double z = m.biases[l](static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < act.size(); ++j)
                z += m.weights[l](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                     act[j];
            next[i] = 1.0 / (1.0 + std::exp(-z));
        }
        act.swap(next);
    }
    double out = m.biases.back()(0);
    for (std::size_t j = 0; j < act.size(); ++j)
        out += m.weights.back()(0, static_cast<Eigen::Index>(j)) * act[j];
    return out;
}

FeatureTable gradient_fixture(int n_series, int len, int d, unsigned seed) {
    return testutil::make_table(n_series, len, d, {0.9, -0.6, 0.3}, 0.4, seed);
}

} // namespace

TEST_CASE("hand-computed forward passes") {
    // One input, one hidden neuron of one layer, output weight 2: g(0) = 0.5.
    NetModel m;
    m.weights = {Eigen::MatrixXd::Zero(1, 1), (Eigen::MatrixXd(1, 1) << 2.0).finished()};
    m.biases = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    Eigen::VectorXd x(1);
    x << 123.0; // irrelevant through zero weights
    CHECK(forward(m, x) == 1.0);

    // Everything zero: output 0 for any input.
    NetModel z;
    z.weights = {Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(3, 3),
                 Eigen::MatrixXd::Zero(1, 3)};
    z.biases = {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(1)};
    Eigen::VectorXd x2(2);
    x2 << -4.0, 9.5;
    CHECK(forward(z, x2) == 0.0);
}

TEST_CASE("forward matches an independent scalar-loop oracle") {
    std::mt19937_64 gen(17);
    const NetModel m = make_model(3, {4, 4}, gen);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::VectorXd x(3);
        for (int j = 0; j < 3; ++j) x(j) = normal(gen);
        CHECK(forward(m, x) == doctest::Approx(oracle_forward(m, x)).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects width mismatches") {
    std::mt19937_64 gen(18);
    const NetModel m = make_model(3, {4}, gen);
    Eigen::VectorXd bad(5);
    bad.setZero();
    CHECK_THROWS_AS(forward(m, bad), DataError);
}

TEST_CASE("net spec validation and naming") {
    NetSpec spec;
    spec.n_hidden_layers = 3;
    spec.neurons_per_layer = 70;
    CHECK(spec.name() == "MLP-L3-N70");
    spec.variant = NetVariant::time_delay;
    spec.taps = 2;
    CHECK(spec.name() == "TD-L3-N70-taps2");
    spec.variant = NetVariant::recurrent;
    CHECK(spec.name() == "RNN-L3-N70");

    spec.n_hidden_layers = 1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.n_hidden_layers = 5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.n_hidden_layers = 2;
    spec.learning_rate = 0.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("time-delay expansion unrolls a series with zero padding") {
    Eigen::MatrixXd x(3, 1);
    x << 1.0, 2.0, 3.0;
    Eigen::VectorXd y(3);
    y << 10, 20, 30;
    std::vector<RowMeta> meta = {{CalendarDate(2013, 1, 1), 1, 1},
                                 {CalendarDate(2013, 1, 2), 1, 1},
                                 {CalendarDate(2013, 1, 3), 1, 1}};
    const FeatureTable t({"x"}, x, y, meta);

    const FeatureTable same = expand_time_delay(t, 0);
    CHECK(same.n_cols() == 1);
    CHECK(testutil::bitwise_equal(same.rows(), t.rows()));

    const FeatureTable exp = expand_time_delay(t, 2);
    CHECK(exp.n_cols() == 3);
    CHECK(exp.column_names() == std::vector<std::string>{"x", "x_lag1", "x_lag2"});
    Eigen::MatrixXd want(3, 3);
    want << 1, 0, 0, 2, 1, 0, 3, 2, 1;
    CHECK(testutil::bitwise_equal(exp.rows(), want));
    CHECK(testutil::bitwise_equal(exp.target(), t.target()));
}

TEST_CASE("time-delay expansion never crosses series boundaries") {
    Eigen::MatrixXd x(4, 1);
    x << 1, 2, 5, 6;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    std::vector<RowMeta> meta = {{CalendarDate(2013, 1, 1), 1, 1},
                                 {CalendarDate(2013, 1, 2), 1, 1},
                                 {CalendarDate(2013, 1, 1), 2, 1},
                                 {CalendarDate(2013, 1, 2), 2, 1}};
    const FeatureTable t({"x"}, x, y, meta);
    const FeatureTable exp = expand_time_delay(t, 1);
    Eigen::MatrixXd want(4, 2);
    want << 1, 0, 2, 1, 5, 0, 6, 5; // second series restarts its padding
    CHECK(testutil::bitwise_equal(exp.rows(), want));
}

TEST_CASE("unordered series rows are rejected") {
    Eigen::MatrixXd x(2, 1);
    x << 1, 2;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
    std::vector<RowMeta> meta = {{CalendarDate(2013, 1, 5), 1, 1},
                                 {CalendarDate(2013, 1, 4), 1, 1}};
    const FeatureTable t({"x"}, x, y, meta);
    CHECK_THROWS_AS(expand_time_delay(t, 1), DataError);

    std::vector<RowMeta> split_series = {{CalendarDate(2013, 1, 1), 1, 1},
                                         {CalendarDate(2013, 1, 1), 2, 1},
                                         {CalendarDate(2013, 1, 2), 1, 1}};
    Eigen::MatrixXd x3 = Eigen::MatrixXd::Zero(3, 1);
    Eigen::VectorXd y3 = Eigen::VectorXd::Zero(3);
    const FeatureTable t3({"x"}, x3, y3, split_series);
    CHECK(testutil::throws_containing<DataError>([&] { (void)series_ranges(t3); },
                                                 "not contiguous"));
}

TEST_CASE("recurrent step degenerates to the plain forward pass when W_h is zero") {
    std::mt19937_64 gen(19);
    NetModel m = make_model(3, {5, 5}, gen);
    m.spec.variant = NetVariant::recurrent;
    m.context_weights = Eigen::MatrixXd::Zero(5, 5);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd x(3), h(5);
        for (int j = 0; j < 3; ++j) x(j) = normal(gen);
        for (int j = 0; j < 5; ++j) h(j) = normal(gen);
        const auto [pred, h_next] = recurrent_step(m, x, h);
        CHECK(pred == doctest::Approx(forward(m, x)).epsilon(1e-12));
    }
}

TEST_CASE("recurrent step with zero first layer produces the 0.5 context") {
    std::mt19937_64 gen(20);
    NetModel m = make_model(2, {4}, gen);
    m.weights[0].setZero();
    m.biases[0].setZero();
    m.context_weights = Eigen::MatrixXd::Zero(4, 4);
    Eigen::VectorXd x(2), h0 = Eigen::VectorXd::Zero(4);
    x << 3.0, -1.0;
    const auto [pred, h1] = recurrent_step(m, x, h0);
    for (int j = 0; j < 4; ++j) CHECK(h1(j) == 0.5);
}

TEST_CASE("a length-3 recurrent series matches a hand unroll") {
    std::mt19937_64 gen(21);
    NetModel m = make_model(2, {3}, gen);
    m.spec.variant = NetVariant::recurrent;
    std::normal_distribution<double> normal(0.0, 0.5);
    m.context_weights.resize(3, 3);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) m.context_weights(i, j) = normal(gen);

    std::vector<Eigen::VectorXd> xs;
    for (int t = 0; t < 3; ++t) {
        Eigen::VectorXd x(2);
        x << normal(gen), normal(gen);
        xs.push_back(x);
    }

    // Hand unroll with scalar loops.
    Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
    std::vector<double> want;
    for (int t = 0; t < 3; ++t) {
        Eigen::VectorXd z = m.weights[0] * xs[static_cast<std::size_t>(t)] +
                            m.context_weights * h + m.biases[0];
        Eigen::VectorXd a(3);
        for (int j = 0; j < 3; ++j) a(j) = 1.0 / (1.0 + std::exp(-z(j)));
        h = a;
        want.push_back((m.weights[1] * a)(0) + m.biases[1](0));
    }

    Eigen::VectorXd hh = Eigen::VectorXd::Zero(3);
    for (int t = 0; t < 3; ++t) {
        const auto [pred, h_next] = recurrent_step(m, xs[static_cast<std::size_t>(t)], hh);
        CHECK(pred == doctest::Approx(want[static_cast<std::size_t>(t)]).epsilon(1e-12));
        hh = h_next;
    }
}

TEST_CASE("training fits a noiseless realizable target") {
    const FeatureTable t = testutil::make_table(4, 100, 3, {0.8, -0.3}, 0.0, 23);
    NetSpec spec;
    spec.n_hidden_layers = 2;
    spec.neurons_per_layer = 20;
    spec.learning_rate = 0.1;
    spec.epochs = 800;
    spec.batch_size = 64;
    spec.seed = 5;
    spec.early_stop_patience = 0; // run the full budget
    const NetModel m = train(spec, t);
    CHECK(m.final_train_mse < 1e-3);
    CHECK(m.epochs_run == 800);
}

TEST_CASE("zero-epoch training returns the seeded initialization") {
    const FeatureTable t = testutil::make_table(2, 30, 3, {0.5}, 0.1, 29);
    NetSpec spec;
    spec.epochs = 0;
    spec.seed = 11;
    const NetModel trained = train(spec, t);
    const NetModel init = init_net(spec, t);
    REQUIRE(trained.weights.size() == init.weights.size());
    for (std::size_t l = 0; l < trained.weights.size(); ++l) {
        CHECK(testutil::bitwise_equal(trained.weights[l], init.weights[l]));
        CHECK(testutil::bitwise_equal(trained.biases[l], init.biases[l]));
    }
    CHECK(testutil::bitwise_equal(predict_net(trained, t), predict_net(init, t)));
}

TEST_CASE("training is deterministic in the spec") {
    const FeatureTable t = testutil::make_table(2, 50, 3, {0.5, 0.2}, 0.2, 31);
    NetSpec spec;
    spec.epochs = 25;
    spec.seed = 77;
    const NetModel a = train(spec, t);
    const NetModel b = train(spec, t);
    for (std::size_t l = 0; l < a.weights.size(); ++l)
        CHECK(testutil::bitwise_equal(a.weights[l], b.weights[l]));
    CHECK(a.final_train_mse == b.final_train_mse);
}

TEST_CASE("an absurd learning rate raises a divergence error") {
    const FeatureTable t = testutil::make_table(2, 50, 3, {0.5}, 0.2, 37);
    NetSpec spec;
    spec.learning_rate = 1e9;
    spec.epochs = 50;
    CHECK_THROWS_AS(train(spec, t), DivergenceError);
}

TEST_CASE("gradient check: plain, time-delay, and recurrent variants") {
    const FeatureTable t = gradient_fixture(10, 5, 6, 41);

    NetSpec plain;
    plain.n_hidden_layers = 2;
    plain.neurons_per_layer = 20;
    plain.seed = 3;
    CHECK(gradient_check(plain, t, 400, 1e-5) < 1e-4);

    NetSpec td = plain;
    td.variant = NetVariant::time_delay;
    td.taps = 2;
    CHECK(gradient_check(td, t, 400, 1e-5) < 1e-4);

    NetSpec rnn = plain;
    rnn.variant = NetVariant::recurrent;
    CHECK(gradient_check(rnn, t, 400, 1e-5) < 1e-4);
}

TEST_CASE("output-bias gradient of the zero network is -2 mean(y)") {
    const FeatureTable t = testutil::make_table(1, 40, 3, {0.7}, 0.3, 43);
    NetSpec spec;
    spec.seed = 9;
    NetModel m = init_net(spec, t);
    for (auto& w : m.weights) w.setZero();
    for (auto& b : m.biases) b.setZero();

    const auto [loss, grad] = net_loss_gradient(m, t);
    const double y_mean = t.target().mean();
    CHECK(loss == doctest::Approx(t.target().squaredNorm() / t.n_rows()).epsilon(1e-12));
    CHECK(grad.back() == doctest::Approx(-2.0 * y_mean).epsilon(1e-8));
}

TEST_CASE("taps=0 time-delay training is bit-identical to the plain MLP") {
    const FeatureTable t = testutil::make_table(3, 40, 4, {0.6, -0.2}, 0.2, 47);
    NetSpec plain;
    plain.epochs = 15;
    plain.seed = 13;
    NetSpec td = plain;
    td.variant = NetVariant::time_delay;
    td.taps = 0;
    const NetModel a = train(plain, t);
    const NetModel b = train(td, t);
    REQUIRE(a.weights.size() == b.weights.size());
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        CHECK(testutil::bitwise_equal(a.weights[l], b.weights[l]));
        CHECK(testutil::bitwise_equal(a.biases[l], b.biases[l]));
    }
}

TEST_CASE("predictions are invariant to affine rescaling of a raw column") {
    const FeatureTable t = testutil::make_table(2, 60, 3, {0.8, 0.3}, 0.2, 53);
    Eigen::MatrixXd rescaled = t.rows();
    rescaled.col(1) = (rescaled.col(1).array() * 3.7 - 5.0).matrix();
    const FeatureTable t2(t.column_names(), std::move(rescaled), t.target(), t.meta());

    NetSpec spec;
    spec.epochs = 20;
    spec.seed = 21;
    const NetModel a = train(spec, t);
    const NetModel b = train(spec, t2);
    const Eigen::VectorXd pa = predict_net(a, t);
    const Eigen::VectorXd pb = predict_net(b, t2);
    for (Eigen::Index i = 0; i < pa.size(); ++i)
        CHECK(pa(i) == doctest::Approx(pb(i)).epsilon(1e-9));
}

TEST_CASE("constant columns are dropped by standardization, not fatal") {
    Eigen::MatrixXd x(20, 2);
    Eigen::VectorXd y(20);
    std::vector<RowMeta> meta(20);
    std::mt19937_64 gen(59);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = normal(gen);
        x(i, 1) = 4.0; // constant
        y(i) = 0.5 * x(i, 0);
        meta[static_cast<std::size_t>(i)] = {CalendarDate(2013, 1, 1).plus_days(i), 1, 1};
    }
    const FeatureTable t({"a", "b"}, x, y, meta);
    const Standardizer s = Standardizer::fit(t);
    CHECK(s.n_kept() == 1);
    CHECK(s.kept_columns() == std::vector<std::string>{"a"});

    NetSpec spec;
    spec.epochs = 5;
    const NetModel m = train(spec, t);
    CHECK(predict_net(m, t).allFinite());
}

TEST_CASE("net serialization round-trips predictions bit-for-bit") {
    testutil::TempDir dir("netio");
    const FeatureTable t = testutil::make_table(2, 40, 3, {0.5, 0.1}, 0.2, 61);
    NetSpec spec;
    spec.epochs = 10;
    spec.seed = 31;
    spec.variant = NetVariant::recurrent;
    const NetModel m = train(spec, t);

    const std::string path = (dir.path() / "model.txt").string();
    m.save(path);
    const NetModel back = NetModel::load(path);
    CHECK(back.spec.name() == m.spec.name());
    CHECK(back.spec.seed == m.spec.seed);
    CHECK(testutil::bitwise_equal(predict_net(back, t), predict_net(m, t)));
    CHECK(back.final_train_mse == m.final_train_mse);

    const std::string bad = (dir.path() / "bad.txt").string();
    {
        std::ofstream out(bad);
        out << "garbage\n";
    }
    CHECK_THROWS_AS(NetModel::load(bad), DataError);
}

TEST_CASE("schema mismatches are reported with the offending columns") {
    const FeatureTable t = testutil::make_table(1, 30, 3, {0.5}, 0.1, 67);
    NetSpec spec;
    spec.epochs = 3;
    const NetModel m = train(spec, t);

    Eigen::MatrixXd x = t.rows().leftCols(2);
    const FeatureTable t2({"f0", "f9"}, x, t.target(), t.meta());
    CHECK(testutil::throws_containing<DataError>([&] { (void)predict_net(m, t2); }, "f9"));
    CHECK(testutil::throws_containing<DataError>([&] { (void)predict_net(m, t2); }, "f2"));
}
