#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/pipeline.hpp"
#include "stormcast/units.hpp"

using namespace stormcast;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// A small fixture whose test window contains 2013-12-25 and some dead pairs.
SynthSpec pipeline_spec(std::uint64_t seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.n_stores = 2;
    spec.n_items = 3;
    spec.n_stations = 2;
    spec.start = CalendarDate(2013, 1, 1);
    spec.end = CalendarDate(2014, 2, 28);
    spec.informative_weather = {"tmax", "dewpoint"};
    spec.weather_effects = {0.8, 0.5};
    spec.noise_sd = 0.2;
    spec.dead_pair_rate = 0.2;
    return spec;
}

PipelineConfig pipeline_config(const SynthPaths& paths, const std::string& out_dir) {
    PipelineConfig cfg;
    cfg.sales_path = paths.sales;
    cfg.weather_path = paths.weather;
    cfg.key_path = paths.key;
    cfg.out_dir = out_dir;
    cfg.train_start = CalendarDate(2013, 1, 1);
    cfg.train_end = CalendarDate(2013, 11, 30);
    cfg.test_start = CalendarDate(2013, 12, 1);
    cfg.test_end = CalendarDate(2014, 2, 28);
    cfg.net_layers = {2};
    cfg.net_neurons = {20};
    cfg.net_epochs = 30;
    cfg.n_runs = 1;
    cfg.bagging_runs = 2;
    cfg.bagging_ntree = 15;
    cfg.rf_ntree = 25;
    cfg.workers = 2;
    cfg.seed = 11;
    return cfg;
}

} // namespace

TEST_CASE("config files parse with comments, overrides, and validation") {
    testutil::TempDir dir("config");
    const std::string path = (dir.path() / "run.conf").string();
    {
        std::ofstream out(path);
        out << "# pipeline config\n"
            << "data.sales = sales.csv\n"
            << "seed = 42\n"
            << "net.neurons = 20,30,40\n"
            << "use_events = false\n"
            << "rf.threshold = 1.5\n";
    }
    PipelineConfig cfg = PipelineConfig::from_file(path);
    CHECK(cfg.sales_path == "sales.csv");
    CHECK(cfg.seed == 42);
    CHECK(cfg.net_neurons == std::vector<int>{20, 30, 40});
    CHECK(cfg.use_events == false);
    CHECK(cfg.rf_threshold == 1.5);
    CHECK(cfg.dataset_names() == std::vector<std::string>{"dweather"});

    cfg.set_key("n_runs", "3");
    CHECK(cfg.n_runs == 3);
    CHECK_THROWS_AS(cfg.set_key("no.such.key", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.set_key("n_runs", "many"), ConfigError);
    CHECK_THROWS_AS(cfg.set_key("use_events", "maybe"), ConfigError);

    // Validation: the referenced files do not exist.
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config cross-field validation") {
    PipelineConfig cfg;
    cfg.sweep_enabled = false; // requires net.chosen
    CHECK(testutil::throws_containing<ConfigError>([&] { cfg.validate(); }, "net.chosen"));

    PipelineConfig events;
    events.use_events = false;
    events.predict_dataset = "devent";
    CHECK(testutil::throws_containing<ConfigError>([&] { events.validate(); }, "use_events"));

    PipelineConfig model;
    model.predict_model = "boosting";
    CHECK(testutil::throws_containing<ConfigError>([&] { model.validate(); }, "predict.model"));
}

TEST_CASE("predict_pipeline applies the zero rules and covers rows exactly once") {
    // Model that predicts a constant positive log value: zero coefficients,
    // positive intercept.
    const FeatureTable train = testutil::make_table(1, 30, 2, {0.5}, 0.1, 3);
    Predictor model;
    model.kind = Predictor::Kind::linear;
    model.linear = fit_ols(train);
    model.linear.coefficients.setZero();
    model.linear.intercept = 1.0;

    Eigen::MatrixXd x(4, 2);
    x.setZero();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    std::vector<RowMeta> meta = {
        {CalendarDate(2013, 12, 20), 1, 1},
        {CalendarDate(2013, 12, 25), 1, 1}, // closure date: forced to zero
        {CalendarDate(2013, 12, 20), 2, 1}, // zero-sales pair
        {CalendarDate(2013, 12, 21), 1, 2},
    };
    const FeatureTable test(train.column_names(), x, y, meta);

    ZeroSalesIndex zeros;
    zeros.insert(2, 1);
    const std::vector<RowMeta> excluded = {{CalendarDate(2013, 12, 22), 9, 9}};

    const auto rows = predict_pipeline(model, test, zeros, excluded);
    REQUIRE(rows.size() == 5);

    auto find = [&](int store, int item, const CalendarDate& d) -> const PredictionRow& {
        for (const auto& r : rows)
            if (r.store == store && r.item == item && r.date == d) return r;
        REQUIRE(false);
        return rows[0];
    };
    CHECK(find(1, 1, CalendarDate(2013, 12, 20)).predicted_units ==
          doctest::Approx(std::expm1(1.0)).epsilon(1e-12));
    CHECK(find(1, 1, CalendarDate(2013, 12, 25)).predicted_units == 0.0);
    CHECK(find(2, 1, CalendarDate(2013, 12, 20)).predicted_units == 0.0);
    CHECK(find(9, 9, CalendarDate(2013, 12, 22)).predicted_units == 0.0);

    // A model predicting log 0 yields 0 units.
    model.linear.intercept = 0.0;
    const auto zero_rows = predict_pipeline(model, test, zeros, excluded);
    CHECK(zero_rows[0].predicted_units >= 0.0);
    bool any_modeled_zero = false;
    for (const auto& r : zero_rows)
        if (r.store == 1 && r.item == 2) any_modeled_zero = r.predicted_units == 0.0;
    CHECK(any_modeled_zero);

    // Duplicate keys are rejected.
    const std::vector<RowMeta> dup = {{CalendarDate(2013, 12, 20), 1, 1}};
    CHECK_THROWS_AS(predict_pipeline(model, test, zeros, dup), DataError);
}

TEST_CASE("prediction CSV shape") {
    testutil::TempDir dir("predcsv");
    const std::vector<PredictionRow> rows = {
        {CalendarDate(2014, 6, 1), 3, 12, 2.5},
        {CalendarDate(2014, 6, 2), 3, 12, 0.0},
    };
    const std::string path = (dir.path() / "predictions.csv").string();
    write_predictions_csv(rows, path);
    CHECK(slurp(path) == "id,units\n3_12_2014-06-01,2.5\n3_12_2014-06-02,0\n");
}

TEST_CASE("feature tables round-trip through the artifact format") {
    testutil::TempDir dir("tableio");
    const FeatureTable t = testutil::make_table(2, 20, 3, {0.4}, 0.3, 5);
    const std::string path = (dir.path() / "table.csv").string();
    save_feature_table(t, path);
    const FeatureTable back = load_feature_table(path);
    CHECK(back.column_names() == t.column_names());
    CHECK(testutil::bitwise_equal(back.rows(), t.rows()));
    CHECK(testutil::bitwise_equal(back.target(), t.target()));
    CHECK(back.meta()[5].date == t.meta()[5].date);
}

TEST_CASE("full pipeline run produces every artifact and is resumable") {
    testutil::TempDir dir("run");
    const auto paths = generate(pipeline_spec(21), (dir.path() / "data").string());
    const PipelineConfig cfg = pipeline_config(paths, (dir.path() / "out").string());
    run_pipeline(cfg);

    const fs::path out(cfg.out_dir);
    for (const char* artifact :
         {"tables/dweather_train.csv", "tables/devent_test.csv", "tables/zeros.csv",
          "tables/excluded_test.csv", "tables/ingest_summary.txt",
          "select/importance_dweather.csv", "select/selected_devent.txt",
          "select/rf_results.csv", "sweep/mlp_sweep.csv", "sweep/chosen.txt",
          "models/dweather_mlp_run0.model", "models/devent_ols_run0.model",
          "models/devent_bagging.metrics", "compare/comparison.csv",
          "compare/comparison.txt", "predictions.csv", "run_manifest.txt"})
        CHECK(fs::exists(out / artifact));

    // Totality: every raw test key appears exactly once.
    const CsvTable sales = read_csv(paths.sales);
    std::set<std::string> want;
    for (const auto& row : sales.rows) {
        const CalendarDate d = CalendarDate::parse(row[0]);
        if (d >= cfg.test_start && d <= cfg.test_end)
            want.insert(row[1] + "_" + row[2] + "_" + row[0]);
    }
    const CsvTable preds = read_csv((out / "predictions.csv").string());
    std::set<std::string> got;
    for (const auto& row : preds.rows) {
        CHECK(got.insert(row[0]).second); // unique
        const double units = std::stod(row[1]);
        CHECK(units >= 0.0);
    }
    CHECK(got == want);

    // Closure-date and zero-pair rows are exactly "0".
    const CsvTable zeros_csv = read_csv((out / "tables/zeros.csv").string());
    std::set<std::string> zero_pairs;
    for (const auto& row : zeros_csv.rows) zero_pairs.insert(row[0] + "_" + row[1]);
    CHECK(!zero_pairs.empty());
    std::size_t forced = 0;
    for (const auto& row : preds.rows) {
        const auto first = row[0].find('_');
        const auto second = row[0].find('_', first + 1);
        const std::string pair = row[0].substr(0, second);
        const std::string date = row[0].substr(second + 1);
        if (zero_pairs.count(pair) || date == "2013-12-25") {
            CHECK(row[1] == "0");
            ++forced;
        }
    }
    CHECK(forced > 0);

    // Resume: dropping only the comparison report recomputes it without
    // touching the models.
    const std::string report_path = (out / "compare/comparison.csv").string();
    const std::string model_path = (out / "models/devent_mlp_run0.model").string();
    const auto model_time = fs::last_write_time(model_path);
    fs::remove(report_path);
    run_pipeline(cfg);
    CHECK(fs::exists(report_path));
    CHECK(fs::last_write_time(model_path) == model_time);
}

TEST_CASE("two runs with identical config and inputs are byte-identical") {
    testutil::TempDir dir("det");
    const auto paths = generate(pipeline_spec(22), (dir.path() / "data").string());
    PipelineConfig a = pipeline_config(paths, (dir.path() / "out_a").string());
    PipelineConfig b = pipeline_config(paths, (dir.path() / "out_b").string());
    run_pipeline(a);
    run_pipeline(b);
    CHECK(slurp(a.out_dir + "/predictions.csv") == slurp(b.out_dir + "/predictions.csv"));
    CHECK(slurp(a.out_dir + "/tables/devent_train.csv") ==
          slurp(b.out_dir + "/tables/devent_train.csv"));
    CHECK(slurp(a.out_dir + "/select/importance_devent.csv") ==
          slurp(b.out_dir + "/select/importance_devent.csv"));
}

TEST_CASE("disabling events drops the Devent track") {
    testutil::TempDir dir("noevents");
    const auto paths = generate(pipeline_spec(23), (dir.path() / "data").string());
    PipelineConfig cfg = pipeline_config(paths, (dir.path() / "out").string());
    cfg.use_events = false;
    run_pipeline(cfg);

    const std::string compare_csv = slurp(cfg.out_dir + "/compare/comparison.csv");
    CHECK(compare_csv.find("dweather") != std::string::npos);
    CHECK(compare_csv.find("devent") == std::string::npos);
    CHECK(!fs::exists(cfg.out_dir + "/select/selected_devent.txt"));
}

TEST_CASE("the predict stage can serve any trained family") {
    testutil::TempDir dir("family");
    const auto paths = generate(pipeline_spec(24), (dir.path() / "data").string());
    PipelineConfig cfg = pipeline_config(paths, (dir.path() / "out").string());
    run_pipeline(cfg);

    for (const char* kind : {"bagging", "ols", "timedelay"}) {
        PipelineConfig alt = cfg;
        alt.predict_model = kind;
        stage_predict(alt);
        const CsvTable preds = read_csv(cfg.out_dir + "/predictions.csv");
        CHECK(preds.rows.size() > 0);
        for (const auto& row : preds.rows) CHECK(std::stod(row[1]) >= 0.0);
    }
}
