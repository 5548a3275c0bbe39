#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/eval.hpp"

using namespace stormcast;

namespace {

NetSpec quick_base() {
    NetSpec base;
    base.epochs = 10;
    base.batch_size = 32;
    return base;
}

} // namespace

TEST_CASE("sweep emits one row per dataset x architecture cell") {
    const FeatureTable t1 = testutil::make_table(2, 30, 3, {0.6}, 0.2, 3);
    const FeatureTable t2 = testutil::make_table(2, 30, 3, {0.3}, 0.2, 4);
    const std::vector<DatasetPair> datasets = {{"alpha", &t1, nullptr}, {"beta", &t2, nullptr}};

    SweepOptions options;
    options.layers = {2};
    options.neurons = {20, 30};
    options.n_runs = 2;
    options.outer_seed = 5;
    options.base = quick_base();

    const EvalReport report = sweep_mlp(datasets, options);
    CHECK(report.rows.size() == 4); // |layers| * |neurons| * |datasets|
    for (const auto& row : report.rows) {
        CHECK(row.phase == "train");
        CHECK(row.n_runs == 2);
        CHECK(row.mse >= 0.0);
        CHECK(row.rmsle >= 0.0);
    }
    CHECK(report.find("MLP-L2-N20", "alpha", "train") != nullptr);
    CHECK(report.find("MLP-L2-N30", "beta", "train") != nullptr);
    CHECK(report.find("MLP-L2-N40", "beta", "train") == nullptr);
}

TEST_CASE("sweep is deterministic under a fixed outer seed") {
    const FeatureTable t = testutil::make_table(2, 30, 3, {0.6}, 0.2, 6);
    const std::vector<DatasetPair> datasets = {{"ds", &t, nullptr}};
    SweepOptions options;
    options.layers = {2};
    options.neurons = {20};
    options.n_runs = 2;
    options.outer_seed = 9;
    options.base = quick_base();

    const EvalReport a = sweep_mlp(datasets, options);
    const EvalReport b = sweep_mlp(datasets, options);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].model == b.rows[i].model);
        CHECK(a.rows[i].mse == b.rows[i].mse); // bitwise: identical training
        CHECK(a.rows[i].rmsle == b.rows[i].rmsle);
        CHECK(a.rows[i].mse_sd == b.rows[i].mse_sd);
        // wall_time_seconds is measured and excluded from comparisons
    }
}

TEST_CASE("argmin per dataset is flagged in the rendered sweep") {
    EvalReport report;
    report.rows = {
        {"MLP-L2-N20", "ds", "train", 0.30, 0.3, 1.0, 1, 0.0},
        {"MLP-L2-N30", "ds", "train", 0.20, 0.2, 1.0, 1, 0.0},
        {"MLP-L3-N20", "ds", "train", 0.25, 0.25, 1.0, 1, 0.0},
    };
    const auto argmin = report.argmin_by_dataset();
    CHECK(argmin.at("ds") == "MLP-L2-N30");
    const std::string text = render_sweep_text(report);
    CHECK(text.find("MLP-L2-N30") != std::string::npos);
    CHECK(text.find('*') != std::string::npos);
}

TEST_CASE("report CSV round-trips through disk") {
    testutil::TempDir dir("evalcsv");
    EvalReport report;
    report.rows = {{"OLS", "ds", "test", 1.5, 0.9, 0.01, 1, 0.0}};
    const std::string path = (dir.path() / "report.csv").string();
    report.save_csv(path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    CHECK(header == "model,dataset,phase,mse,rmsle,wall_time_seconds,n_runs,mse_sd");
    CHECK(line.rfind("OLS,ds,test,1.5,0.9,", 0) == 0);
}

TEST_CASE("compare_models produces train and test rows for all five families") {
    const FeatureTable train = testutil::make_table(4, 40, 3, {0.7, -0.3}, 0.2, 11);
    const FeatureTable test = testutil::make_table(4, 20, 3, {0.7, -0.3}, 0.2, 12);
    const std::vector<DatasetPair> datasets = {{"ds", &train, &test}};

    CompareOptions options;
    NetSpec chosen = quick_base();
    chosen.n_hidden_layers = 2;
    chosen.neurons_per_layer = 20;
    options.chosen_mlp["ds"] = chosen;
    options.taps = 2;
    options.ntree_bagging = 10;
    options.n_bagging_runs = 2;
    options.n_runs = 1;
    options.outer_seed = 3;

    const EvalReport report = compare_models(datasets, options);
    CHECK(report.rows.size() == 10);
    for (const char* model :
         {"MLP-L2-N20", "TD-L2-N20-taps2", "RNN-L2-N20", "Bagging-T10", "OLS"}) {
        CHECK(report.find(model, "ds", "train") != nullptr);
        CHECK(report.find(model, "ds", "test") != nullptr);
    }
    const std::string text = render_compare_text(report);
    CHECK(text.find("== ds ==") != std::string::npos);
    CHECK(text.find("OLS") != std::string::npos);

    CompareOptions missing;
    CHECK_THROWS_AS(compare_models(datasets, missing), ConfigError);
}

TEST_CASE("on a linear fixture OLS and the MLP are close; the RNN trails both") {
    int agree = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const FeatureTable train =
            testutil::make_table(8, 50, 4, {0.9, -0.5}, 0.2, static_cast<unsigned>(seed));
        const FeatureTable test = testutil::make_table(8, 25, 4, {0.9, -0.5}, 0.2,
                                                       static_cast<unsigned>(700 + seed));
        const std::vector<DatasetPair> datasets = {{"lin", &train, &test}};

        CompareOptions options;
        NetSpec chosen;
        chosen.n_hidden_layers = 2;
        chosen.neurons_per_layer = 20;
        chosen.epochs = 80;
        options.chosen_mlp["lin"] = chosen;
        options.n_runs = 1;
        options.n_bagging_runs = 1;
        options.ntree_bagging = 5;
        options.outer_seed = seed;

        const EvalReport report = compare_models(datasets, options);
        const double mlp = report.find("MLP-L2-N20", "lin", "test")->mse;
        const double ols = report.find("OLS", "lin", "test")->mse;
        const double rnn = report.find("RNN-L2-N20", "lin", "test")->mse;
        if (mlp <= 2.0 * ols && ols <= 2.0 * mlp && mlp < rnn && ols < rnn) ++agree;
    }
    CHECK(agree == 10);
}
