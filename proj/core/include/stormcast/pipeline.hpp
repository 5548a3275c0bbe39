#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stormcast/feature_table.hpp"
#include "stormcast/forest.hpp"
#include "stormcast/ingest.hpp"
#include "stormcast/linear.hpp"
#include "stormcast/net.hpp"

namespace stormcast {

inline constexpr const char* kVersion = "0.1.0";

/// Everything one end-to-end run needs, loadable from a flat key-value file
/// with dotted keys. Flags from the CLI override file values.
struct PipelineConfig {
    std::string sales_path, weather_path, key_path;
    std::string holidays_path; // empty: built-in US holiday table
    std::string out_dir = "out";

    CalendarDate train_start{2012, 1, 1}, train_end{2014, 5, 31};
    CalendarDate test_start{2014, 6, 1}, test_end{2014, 10, 31};

    int rf_mtry = 4;
    int rf_ntree = 50;
    int rf_min_leaf = 5;
    double rf_threshold = 1.0;
    std::string rf_grid; // "2x50,2x100,4x50,4x100"; empty: single (mtry, ntree)

    std::vector<int> net_layers = {2, 3, 4};
    std::vector<int> net_neurons = {20, 30, 40, 50, 60, 70, 80, 90, 100};
    double net_learning_rate = 0.05;
    int net_epochs = 200;
    int net_batch_size = 128;
    bool sweep_enabled = true;
    std::string net_chosen; // "L3-N70"; required when the sweep is disabled

    int taps = 2;
    int bagging_ntree = 50;
    int bagging_runs = 10;

    std::uint64_t seed = 1;
    int n_runs = 5;
    bool use_events = true;
    bool replicate_paper_scale = false;
    unsigned workers = 0; // 0: STORMCAST_WORKERS env or hardware concurrency

    std::string predict_model = "mlp"; // mlp | timedelay | rnn | bagging | ols
    std::string predict_dataset;       // default: devent when use_events, else dweather

    static PipelineConfig from_file(const std::string& path);
    void set_key(const std::string& key, const std::string& value);
    void validate() const;

    std::vector<std::string> dataset_names() const;
    SplitSpec split_spec() const { return SplitSpec(train_start, train_end, test_start, test_end); }
};

struct PredictionRow {
    CalendarDate date;
    int store = 0;
    int item = 0;
    double predicted_units = 0.0;
};

/// A trained regressor of any family, behind one prediction surface.
struct Predictor {
    enum class Kind { net, forest, linear };
    Kind kind = Kind::net;
    NetModel net;
    ForestModel forest;
    LinearModel linear;

    // Log1p-scale predictions; errors name missing/extra columns on schema
    // mismatch.
    Eigen::VectorXd predict_log(const FeatureTable& table) const;
    const std::vector<std::string>& columns() const;

    void save(const std::string& path) const;
    static Predictor load(const std::string& path);
};

/// Applies the unit recovery and the zero-assignment rules: modeled rows get
/// clamp(expm1(pred), 0); rows for zero-sales pairs or dated on the closure
/// date get exactly 0; excluded rows re-enter with 0. Output is sorted by
/// (store, item, date) and covers modeled plus excluded rows exactly once.
std::vector<PredictionRow> predict_pipeline(const Predictor& model, const FeatureTable& test_table,
                                            const ZeroSalesIndex& zeros,
                                            const std::vector<RowMeta>& excluded_test_rows);

void write_predictions_csv(const std::vector<PredictionRow>& rows, const std::string& path);

// Feature-table artifact IO (CSV with date, store, item, target, then the
// feature columns). Numbers round-trip exactly.
void save_feature_table(const FeatureTable& table, const std::string& path);
FeatureTable load_feature_table(const std::string& path);

// Individual pipeline stages; each is resumable (skips itself when its
// content stamp matches and its artifacts exist) and loads upstream
// artifacts from the output directory.
void stage_ingest(const PipelineConfig& config);
void stage_select(const PipelineConfig& config);
void stage_sweep(const PipelineConfig& config);
void stage_train(const PipelineConfig& config);
void stage_compare(const PipelineConfig& config);
void stage_predict(const PipelineConfig& config);

// ingest -> select -> sweep -> train -> compare -> predict, plus the run
// manifest. Any stage error is rethrown with the stage name attached.
void run_pipeline(const PipelineConfig& config);

} // namespace stormcast
