#include "stormcast/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/eval.hpp"
#include "stormcast/metrics.hpp"
#include "stormcast/rng.hpp"
#include "stormcast/synth.hpp"
#include "stormcast/units.hpp"

namespace fs = std::filesystem;

namespace stormcast {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open input file: " + path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

std::uint64_t hash_string(const std::string& s, std::uint64_t h = 0xCBF29CE484222325ULL) {
    return fnv1a(s.data(), s.size(), h);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// ---- stage stamps ------------------------------------------------------

fs::path stamp_path(const PipelineConfig& cfg, const std::string& stage) {
    return fs::path(cfg.out_dir) / "stamps" / (stage + ".stamp");
}

bool stage_up_to_date(const PipelineConfig& cfg, const std::string& stage, std::uint64_t key,
                      const std::vector<std::string>& artifacts) {
    std::ifstream in(stamp_path(cfg, stage));
    if (!in) return false;
    std::string recorded;
    if (!std::getline(in, recorded) || recorded != hex64(key)) return false;
    for (const auto& a : artifacts)
        if (!fs::exists(a)) return false;
    return true;
}

void write_stamp(const PipelineConfig& cfg, const std::string& stage, std::uint64_t key,
                 const std::vector<std::string>& artifacts) {
    fs::create_directories(fs::path(cfg.out_dir) / "stamps");
    std::ofstream out(stamp_path(cfg, stage), std::ios::binary);
    if (!out) throw DataError("cannot write stage stamp for " + stage);
    out << hex64(key) << '\n';
    for (const auto& a : artifacts) out << a << '\n';
}

// ---- paths -------------------------------------------------------------

struct Paths {
    fs::path root;
    explicit Paths(const PipelineConfig& cfg) : root(cfg.out_dir) {}

    std::string table(const std::string& ds, const std::string& phase) const {
        return (root / "tables" / (ds + "_" + phase + ".csv")).string();
    }
    std::string zeros() const { return (root / "tables" / "zeros.csv").string(); }
    std::string excluded() const { return (root / "tables" / "excluded_test.csv").string(); }
    std::string ingest_summary() const { return (root / "tables" / "ingest_summary.txt").string(); }
    std::string importance(const std::string& ds) const {
        return (root / "select" / ("importance_" + ds + ".csv")).string();
    }
    std::string selected(const std::string& ds) const {
        return (root / "select" / ("selected_" + ds + ".txt")).string();
    }
    std::string rf_results_csv() const { return (root / "select" / "rf_results.csv").string(); }
    std::string rf_results_txt() const { return (root / "select" / "rf_results.txt").string(); }
    std::string sweep_csv() const { return (root / "sweep" / "mlp_sweep.csv").string(); }
    std::string sweep_txt() const { return (root / "sweep" / "mlp_sweep.txt").string(); }
    std::string sweep_chosen() const { return (root / "sweep" / "chosen.txt").string(); }
    std::string model(const std::string& ds, const std::string& kind, int run) const {
        return (root / "models" / (ds + "_" + kind + "_run" + std::to_string(run) + ".model"))
            .string();
    }
    std::string metrics(const std::string& ds, const std::string& kind) const {
        return (root / "models" / (ds + "_" + kind + ".metrics")).string();
    }
    std::string compare_csv() const { return (root / "compare" / "comparison.csv").string(); }
    std::string compare_txt() const { return (root / "compare" / "comparison.txt").string(); }
    std::string predictions() const { return (root / "predictions.csv").string(); }
    std::string manifest() const { return (root / "run_manifest.txt").string(); }
};

const std::vector<std::string> kModelKinds = {"mlp", "timedelay", "rnn", "bagging", "ols"};

// ---- config ------------------------------------------------------------

std::pair<int, int> parse_arch(const std::string& name) {
    // "L3-N70"
    int layers = 0, neurons = 0;
    if (std::sscanf(name.c_str(), "L%d-N%d", &layers, &neurons) != 2 || layers <= 0 ||
        neurons <= 0)
        throw ConfigError("bad architecture name '" + name + "' (expected e.g. L3-N40)");
    return {layers, neurons};
}

std::vector<std::pair<int, int>> parse_rf_grid(const std::string& grid) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(grid);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        int mtry = 0, ntree = 0;
        if (std::sscanf(item.c_str(), "%dx%d", &mtry, &ntree) != 2 || mtry <= 0 || ntree <= 0)
            throw ConfigError("bad rf.grid entry '" + item + "' (expected e.g. 4x50)");
        out.emplace_back(mtry, ntree);
    }
    return out;
}

} // namespace

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            cfg.set_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void PipelineConfig::set_key(const std::string& key, const std::string& value) {
    if (key == "data.sales") sales_path = value;
    else if (key == "data.weather") weather_path = value;
    else if (key == "data.key") key_path = value;
    else if (key == "data.holidays") holidays_path = value;
    else if (key == "out.dir") out_dir = value;
    else if (key == "split.train_start") train_start = CalendarDate::parse(value);
    else if (key == "split.train_end") train_end = CalendarDate::parse(value);
    else if (key == "split.test_start") test_start = CalendarDate::parse(value);
    else if (key == "split.test_end") test_end = CalendarDate::parse(value);
    else if (key == "rf.mtry") rf_mtry = static_cast<int>(parse_int(key, value));
    else if (key == "rf.ntree") rf_ntree = static_cast<int>(parse_int(key, value));
    else if (key == "rf.min_leaf") rf_min_leaf = static_cast<int>(parse_int(key, value));
    else if (key == "rf.threshold") rf_threshold = parse_real(key, value);
    else if (key == "rf.grid") rf_grid = value;
    else if (key == "net.layers") net_layers = parse_int_list(key, value);
    else if (key == "net.neurons") net_neurons = parse_int_list(key, value);
    else if (key == "net.learning_rate") net_learning_rate = parse_real(key, value);
    else if (key == "net.epochs") net_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "net.batch_size") net_batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "net.chosen") net_chosen = value;
    else if (key == "sweep.enabled") sweep_enabled = parse_bool(key, value);
    else if (key == "taps") taps = static_cast<int>(parse_int(key, value));
    else if (key == "bagging.ntree") bagging_ntree = static_cast<int>(parse_int(key, value));
    else if (key == "bagging.runs") bagging_runs = static_cast<int>(parse_int(key, value));
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "n_runs") n_runs = static_cast<int>(parse_int(key, value));
    else if (key == "use_events") use_events = parse_bool(key, value);
    else if (key == "replicate_paper_scale") replicate_paper_scale = parse_bool(key, value);
    else if (key == "workers") workers = static_cast<unsigned>(parse_int(key, value));
    else if (key == "predict.model") predict_model = value;
    else if (key == "predict.dataset") predict_dataset = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

void PipelineConfig::validate() const {
    for (const auto& [label, p] :
         std::initializer_list<std::pair<const char*, const std::string*>>{
             {"data.sales", &sales_path}, {"data.weather", &weather_path},
             {"data.key", &key_path}}) {
        if (p->empty()) throw ConfigError(std::string("config: ") + label + " is required");
        if (!fs::exists(*p))
            throw ConfigError(std::string("config: ") + label + " does not exist: " + *p);
    }
    if (!holidays_path.empty() && !fs::exists(holidays_path))
        throw ConfigError("config: data.holidays does not exist: " + holidays_path);
    (void)split_spec(); // validates the date ranges
    if (rf_mtry <= 0 || rf_ntree <= 0 || rf_min_leaf <= 0)
        throw ConfigError("config: rf parameters must be positive");
    if (!rf_grid.empty()) (void)parse_rf_grid(rf_grid);
    if (net_layers.empty() || net_neurons.empty())
        throw ConfigError("config: net grid must be non-empty");
    if (!sweep_enabled && net_chosen.empty())
        throw ConfigError("config: net.chosen is required when sweep.enabled = false");
    if (!net_chosen.empty()) (void)parse_arch(net_chosen);
    if (n_runs < 1) throw ConfigError("config: n_runs must be positive");
    if (taps < 0) throw ConfigError("config: taps must be non-negative");
    if (bagging_ntree < 1 || bagging_runs < 1)
        throw ConfigError("config: bagging parameters must be positive");
    if (std::find(kModelKinds.begin(), kModelKinds.end(), predict_model) == kModelKinds.end())
        throw ConfigError("config: predict.model must be one of mlp|timedelay|rnn|bagging|ols");
    if (!predict_dataset.empty() && predict_dataset != "dweather" &&
        predict_dataset != "devent")
        throw ConfigError("config: predict.dataset must be dweather or devent");
    if (predict_dataset == "devent" && !use_events)
        throw ConfigError("config: predict.dataset=devent requires use_events=true");
}

std::vector<std::string> PipelineConfig::dataset_names() const {
    std::vector<std::string> names = {"dweather"};
    if (use_events) names.push_back("devent");
    return names;
}

// ---- predictor ---------------------------------------------------------

Eigen::VectorXd Predictor::predict_log(const FeatureTable& table) const {
    switch (kind) {
        case Kind::net: return predict_net(net, table);
        case Kind::linear: return linear.predict(table);
        case Kind::forest: {
            if (table.column_names() != forest.column_names()) {
                std::string missing, extra;
                for (const auto& c : forest.column_names())
                    if (table.column_index(c) < 0) missing += (missing.empty() ? "" : ",") + c;
                for (const auto& c : table.column_names())
                    if (std::find(forest.column_names().begin(), forest.column_names().end(),
                                  c) == forest.column_names().end())
                        extra += (extra.empty() ? "" : ",") + c;
                throw DataError("forest predict: column schema mismatch (missing: [" + missing +
                                "], extra: [" + extra + "])");
            }
            return forest.predict(table.rows());
        }
    }
    throw DataError("predictor: unknown kind");
}

const std::vector<std::string>& Predictor::columns() const {
    switch (kind) {
        case Kind::net: return net.standardizer.input_columns();
        case Kind::linear: return linear.standardizer.input_columns();
        case Kind::forest: return forest.column_names();
    }
    throw DataError("predictor: unknown kind");
}

void Predictor::save(const std::string& path) const {
    switch (kind) {
        case Kind::net: net.save(path); return;
        case Kind::linear: linear.save(path); return;
        case Kind::forest: forest.save(path); return;
    }
}

Predictor Predictor::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string header;
    std::getline(in, header);
    in.close();
    Predictor p;
    if (header.rfind("stormcast-net", 0) == 0) {
        p.kind = Kind::net;
        p.net = NetModel::load(path);
    } else if (header.rfind("stormcast-forest", 0) == 0) {
        p.kind = Kind::forest;
        p.forest = ForestModel::load(path);
    } else if (header.rfind("stormcast-linear", 0) == 0) {
        p.kind = Kind::linear;
        p.linear = LinearModel::load(path);
    } else {
        throw DataError(path + ": unrecognized model file header");
    }
    return p;
}

// ---- prediction assembly ------------------------------------------------

std::vector<PredictionRow> predict_pipeline(const Predictor& model, const FeatureTable& test_table,
                                            const ZeroSalesIndex& zeros,
                                            const std::vector<RowMeta>& excluded_test_rows) {
    std::vector<PredictionRow> out;
    out.reserve(test_table.n_rows() + excluded_test_rows.size());

    if (test_table.n_rows() > 0) {
        const Eigen::VectorXd pred_log = model.predict_log(test_table);
        for (std::size_t i = 0; i < test_table.n_rows(); ++i) {
            const RowMeta& m = test_table.meta()[i];
            double units = expm1_pred(pred_log(static_cast<Eigen::Index>(i)));
            if (zeros.contains(m.store, m.item) || m.date == store_closure_date()) units = 0.0;
            out.push_back({m.date, m.store, m.item, units});
        }
    }
    for (const RowMeta& m : excluded_test_rows) out.push_back({m.date, m.store, m.item, 0.0});

    std::sort(out.begin(), out.end(), [](const PredictionRow& a, const PredictionRow& b) {
        if (a.store != b.store) return a.store < b.store;
        if (a.item != b.item) return a.item < b.item;
        return a.date < b.date;
    });
    for (std::size_t i = 1; i < out.size(); ++i) {
        const auto& a = out[i - 1];
        const auto& b = out[i];
        if (a.store == b.store && a.item == b.item && a.date == b.date)
            throw DataError("predict: duplicate key " + std::to_string(a.store) + "_" +
                            std::to_string(a.item) + "_" + a.date.to_string());
    }
    return out;
}

void write_predictions_csv(const std::vector<PredictionRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "id,units\n";
    for (const auto& r : rows)
        out << r.store << '_' << r.item << '_' << r.date.to_string() << ','
            << format_double(r.predicted_units) << '\n';
}

// ---- feature-table artifacts --------------------------------------------

void save_feature_table(const FeatureTable& table, const std::string& path) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "date,store,item,target";
    for (const auto& c : table.column_names()) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        const RowMeta& m = table.meta()[i];
        out << m.date.to_string() << ',' << m.store << ',' << m.item << ','
            << format_double(table.target()(static_cast<Eigen::Index>(i)));
        for (Eigen::Index j = 0; j < table.rows().cols(); ++j)
            out << ',' << format_double(table.rows()(static_cast<Eigen::Index>(i), j));
        out << '\n';
    }
}

FeatureTable load_feature_table(const std::string& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() < 4 || csv.header[0] != "date" || csv.header[1] != "store" ||
        csv.header[2] != "item" || csv.header[3] != "target")
        throw DataError(path + ": not a feature-table artifact");
    std::vector<std::string> cols(csv.header.begin() + 4, csv.header.end());
    const std::size_t n = csv.rows.size();
    Eigen::MatrixXd m(n, cols.size());
    Eigen::VectorXd t(n);
    std::vector<RowMeta> meta(n);
    for (std::size_t i = 0; i < n; ++i) {
        meta[i].date = CalendarDate::parse(csv.rows[i][0]);
        auto to_int = [&](const std::string& s) {
            int v = 0;
            auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc{})
                throw DataError(path + ":" + std::to_string(csv.line_numbers[i]) + ": bad int");
            return v;
        };
        auto to_real = [&](const std::string& s) {
            double v = 0.0;
            auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc{})
                throw DataError(path + ":" + std::to_string(csv.line_numbers[i]) +
                                ": bad number");
            return v;
        };
        meta[i].store = to_int(csv.rows[i][1]);
        meta[i].item = to_int(csv.rows[i][2]);
        t(static_cast<Eigen::Index>(i)) = to_real(csv.rows[i][3]);
        for (std::size_t j = 0; j < cols.size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                to_real(csv.rows[i][j + 4]);
    }
    return FeatureTable(std::move(cols), std::move(m), std::move(t), std::move(meta));
}

namespace {

// Zero index round-trips through an explicit pair list so the predict stage
// can reload it.
struct ZeroIO {
    static void save(const std::vector<std::pair<int, int>>& pairs, const std::string& path) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        out << "store,item\n";
        for (const auto& [s, i] : pairs) out << s << ',' << i << '\n';
    }
    static ZeroSalesIndex load(const std::string& path) {
        const CsvTable csv = read_csv(path, {"store", "item"});
        ZeroSalesIndex z;
        for (const auto& row : csv.rows)
            z.insert(std::stoi(row[0]), std::stoi(row[1]));
        return z;
    }
};

void save_excluded(const std::vector<RowMeta>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "date,store,item\n";
    std::vector<RowMeta> sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const RowMeta& a, const RowMeta& b) {
        if (a.store != b.store) return a.store < b.store;
        if (a.item != b.item) return a.item < b.item;
        return a.date < b.date;
    });
    for (const auto& r : sorted)
        out << r.date.to_string() << ',' << r.store << ',' << r.item << '\n';
}

std::vector<RowMeta> load_excluded(const std::string& path) {
    const CsvTable csv = read_csv(path, {"date", "store", "item"});
    std::vector<RowMeta> out;
    for (const auto& row : csv.rows)
        out.push_back({CalendarDate::parse(row[0]), std::stoi(row[1]), std::stoi(row[2])});
    return out;
}

std::vector<std::string> load_selected_columns(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open selected-columns file: " + path);
    std::vector<std::string> cols;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (!line.empty()) cols.push_back(line);
    }
    if (cols.empty()) throw DataError(path + ": no columns listed");
    return cols;
}

DateSet holidays_for(const PipelineConfig& cfg) {
    return cfg.holidays_path.empty() ? default_us_holidays() : load_holidays(cfg.holidays_path);
}

std::uint64_t ingest_key(const PipelineConfig& cfg) {
    std::uint64_t h = hash_string(std::string("ingest|") + kVersion);
    h = fnv1a(&h, sizeof h, hash_file(cfg.sales_path));
    h = fnv1a(&h, sizeof h, hash_file(cfg.weather_path));
    h = fnv1a(&h, sizeof h, hash_file(cfg.key_path));
    h = hash_string(cfg.holidays_path.empty() ? "builtin-holidays-v1"
                                              : hex64(hash_file(cfg.holidays_path)),
                    h);
    h = hash_string(cfg.train_start.to_string() + cfg.train_end.to_string() +
                        cfg.test_start.to_string() + cfg.test_end.to_string(),
                    h);
    return h;
}

std::uint64_t select_key(const PipelineConfig& cfg) {
    std::string repr = "select|" + hex64(ingest_key(cfg)) + '|' + std::to_string(cfg.rf_mtry) +
                       '|' + std::to_string(cfg.rf_ntree) + '|' +
                       std::to_string(cfg.rf_min_leaf) + '|' + format_double(cfg.rf_threshold) +
                       '|' + cfg.rf_grid + '|' + std::to_string(cfg.seed) + '|' +
                       (cfg.use_events ? "events" : "noevents");
    return hash_string(repr);
}

std::string net_grid_repr(const PipelineConfig& cfg) {
    std::string repr;
    for (int l : cfg.net_layers) repr += 'L' + std::to_string(l);
    for (int n : cfg.net_neurons) repr += 'N' + std::to_string(n);
    repr += "|lr" + format_double(cfg.net_learning_rate) + "|e" +
            std::to_string(cfg.net_epochs) + "|b" + std::to_string(cfg.net_batch_size);
    return repr;
}

std::uint64_t sweep_key(const PipelineConfig& cfg) {
    return hash_string("sweep|" + hex64(select_key(cfg)) + '|' + net_grid_repr(cfg) + '|' +
                       std::to_string(cfg.n_runs) + '|' + std::to_string(cfg.seed));
}

std::uint64_t train_key(const PipelineConfig& cfg) {
    std::string chosen_src = cfg.sweep_enabled ? "sweep:" + hex64(sweep_key(cfg))
                                               : "fixed:" + cfg.net_chosen;
    return hash_string("train|" + hex64(select_key(cfg)) + '|' + chosen_src + '|' +
                       net_grid_repr(cfg) + "|taps" + std::to_string(cfg.taps) + "|bag" +
                       std::to_string(cfg.bagging_ntree) + 'x' +
                       std::to_string(cfg.bagging_runs) + '|' + std::to_string(cfg.n_runs) +
                       '|' + std::to_string(cfg.seed));
}

std::uint64_t compare_key(const PipelineConfig& cfg) {
    return hash_string("compare|" + hex64(train_key(cfg)));
}

std::uint64_t predict_key(const PipelineConfig& cfg) {
    const std::string ds =
        cfg.predict_dataset.empty() ? (cfg.use_events ? "devent" : "dweather")
                                    : cfg.predict_dataset;
    return hash_string("predict|" + hex64(train_key(cfg)) + '|' + cfg.predict_model + '|' + ds);
}

std::string effective_predict_dataset(const PipelineConfig& cfg) {
    return cfg.predict_dataset.empty() ? (cfg.use_events ? "devent" : "dweather")
                                       : cfg.predict_dataset;
}

// Chosen MLP architecture per dataset, from the sweep artifact or the fixed
// config value.
std::map<std::string, std::pair<int, int>> chosen_arch(const PipelineConfig& cfg) {
    std::map<std::string, std::pair<int, int>> out;
    if (!cfg.sweep_enabled) {
        for (const auto& ds : cfg.dataset_names()) out[ds] = parse_arch(cfg.net_chosen);
        return out;
    }
    const Paths paths(cfg);
    std::ifstream in(paths.sweep_chosen());
    if (!in)
        throw DataError("missing sweep artifact " + paths.sweep_chosen() +
                        " (run the sweep stage first)");
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError(paths.sweep_chosen() + ": malformed line");
        const std::string ds = line.substr(0, eq);
        std::string model = line.substr(eq + 1); // "MLP-L3-N40"
        if (model.rfind("MLP-", 0) == 0) model = model.substr(4);
        out[ds] = parse_arch(model);
    }
    for (const auto& ds : cfg.dataset_names())
        if (!out.count(ds))
            throw DataError(paths.sweep_chosen() + ": no chosen architecture for " + ds);
    return out;
}

NetSpec base_net_spec(const PipelineConfig& cfg) {
    NetSpec spec;
    spec.learning_rate = cfg.net_learning_rate;
    spec.epochs = cfg.net_epochs;
    spec.batch_size = cfg.net_batch_size;
    return spec;
}

FeatureTable load_selected_table(const PipelineConfig& cfg, const std::string& ds,
                                 const std::string& phase) {
    const Paths paths(cfg);
    const FeatureTable full = load_feature_table(paths.table(ds, phase));
    return full.select_columns(load_selected_columns(paths.selected(ds)));
}

} // namespace

// ---- stages --------------------------------------------------------------

void stage_ingest(const PipelineConfig& cfg) {
    const Paths paths(cfg);
    std::vector<std::string> artifacts = {paths.zeros(), paths.excluded(),
                                          paths.ingest_summary()};
    for (const auto& ds : {"dweather", "devent"})
        for (const auto& phase : {"train", "test"})
            artifacts.push_back(paths.table(ds, phase));

    const std::uint64_t key = ingest_key(cfg);
    if (stage_up_to_date(cfg, "ingest", key, artifacts)) {
        std::cout << "[ingest] up to date\n";
        return;
    }

    RawTables raw = load_tables(cfg.sales_path, cfg.weather_path, cfg.key_path);
    raw.weather = impute_weather(raw.weather);
    const IngestResult res =
        build_feature_tables(raw.sales, raw.weather, raw.key, holidays_for(cfg),
                             cfg.split_spec());

    save_feature_table(res.dweather_train, paths.table("dweather", "train"));
    save_feature_table(res.dweather_test, paths.table("dweather", "test"));
    save_feature_table(res.devent_train, paths.table("devent", "train"));
    save_feature_table(res.devent_test, paths.table("devent", "test"));

    // Reconstruct the zero-pair list from stats bookkeeping order-free: scan
    // the excluded rows and training exclusions via the index itself.
    std::vector<std::pair<int, int>> zero_pairs;
    {
        std::set<std::pair<int, int>> seen;
        for (const auto& s : raw.sales) {
            if (res.zeros.contains(s.store, s.item)) seen.insert({s.store, s.item});
        }
        zero_pairs.assign(seen.begin(), seen.end());
    }
    ZeroIO::save(zero_pairs, paths.zeros());
    save_excluded(res.excluded_test_rows, paths.excluded());

    {
        std::ofstream out(paths.ingest_summary(), std::ios::binary);
        if (!out) throw DataError("cannot write " + paths.ingest_summary());
        const IngestStats& s = res.stats;
        out << "raw_sales_rows=" << s.raw_sales_rows << '\n'
            << "train_rows_split=" << s.train_rows_split << '\n'
            << "test_rows_split=" << s.test_rows_split << '\n'
            << "train_closed_removed=" << s.train_closed_removed << '\n'
            << "test_closed_removed=" << s.test_closed_removed << '\n'
            << "train_zero_removed=" << s.train_zero_removed << '\n'
            << "test_zero_removed=" << s.test_zero_removed << '\n'
            << "train_rows_final=" << s.train_rows_final << '\n'
            << "test_rows_final=" << s.test_rows_final << '\n'
            << "zero_pairs=" << res.zeros.size() << '\n';
        if (cfg.replicate_paper_scale)
            out << "# original-dataset reference: 3892716 train observations, ~721000 test\n"
                << "# observations, reduced to 235789 after exclusions\n";
    }

    write_stamp(cfg, "ingest", key, artifacts);
    std::cout << "[ingest] train rows " << res.stats.train_rows_final << ", test rows "
              << res.stats.test_rows_final << ", zero pairs " << res.zeros.size() << "\n";
}

void stage_select(const PipelineConfig& cfg) {
    const Paths paths(cfg);
    std::vector<std::string> artifacts = {paths.rf_results_csv(), paths.rf_results_txt()};
    for (const auto& ds : cfg.dataset_names()) {
        artifacts.push_back(paths.importance(ds));
        artifacts.push_back(paths.selected(ds));
    }
    const std::uint64_t key = select_key(cfg);
    if (stage_up_to_date(cfg, "select", key, artifacts)) {
        std::cout << "[select] up to date\n";
        return;
    }

    auto grid = parse_rf_grid(cfg.rf_grid);
    if (grid.empty()) grid.emplace_back(cfg.rf_mtry, cfg.rf_ntree);

    fs::create_directories(fs::path(cfg.out_dir) / "select");
    std::ofstream rf_csv(paths.rf_results_csv(), std::ios::binary);
    std::ofstream rf_txt(paths.rf_results_txt(), std::ios::binary);
    if (!rf_csv || !rf_txt) throw DataError("cannot write rf results");
    rf_csv << "dataset,mtry,ntree,oob_mse,pct_var_explained,chosen\n";

    for (const auto& ds : cfg.dataset_names()) {
        const FeatureTable train = load_feature_table(paths.table(ds, "train"));

        std::vector<ImportanceReport> reports;
        std::size_t best = 0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            ForestParams params;
            params.mtry = grid[g].first;
            params.ntree = grid[g].second;
            params.min_leaf = cfg.rf_min_leaf;
            params.seed = mix_seed({cfg.seed, hash_string(ds),
                                    static_cast<std::uint64_t>(grid[g].first),
                                    static_cast<std::uint64_t>(grid[g].second)});
            reports.push_back(fit_forest(train, params).report);
            if (reports[g].oob_mse < reports[best].oob_mse) best = g;
        }

        rf_txt << "== " << ds << " ==\n";
        for (std::size_t g = 0; g < grid.size(); ++g) {
            rf_csv << ds << ',' << grid[g].first << ',' << grid[g].second << ','
                   << format_double(reports[g].oob_mse) << ','
                   << format_double(reports[g].pct_var_explained) << ','
                   << (g == best ? 1 : 0) << '\n';
            char line[160];
            std::snprintf(line, sizeof line,
                          "mtry=%d ntree=%-4d  OOB MSE %-12.6f  %%Var explained %-8.2f%s\n",
                          grid[g].first, grid[g].second, reports[g].oob_mse,
                          reports[g].pct_var_explained, g == best ? "  <- chosen" : "");
            rf_txt << line;
        }

        reports[best].save_csv(paths.importance(ds));
        const FeatureSelection sel = select_features(reports[best], cfg.rf_threshold);
        std::ofstream out(paths.selected(ds), std::ios::binary);
        if (!out) throw DataError("cannot write " + paths.selected(ds));
        for (const auto& c : sel.columns) out << c << '\n';
        std::cout << "[select] " << ds << ": " << train.n_cols() << " -> " << sel.columns.size()
                  << " columns" << (sel.fell_back ? " (fallback)" : "") << "\n";
    }

    write_stamp(cfg, "select", key, artifacts);
}

void stage_sweep(const PipelineConfig& cfg) {
    if (!cfg.sweep_enabled) {
        std::cout << "[sweep] disabled (net.chosen = " << cfg.net_chosen << ")\n";
        return;
    }
    const Paths paths(cfg);
    const std::vector<std::string> artifacts = {paths.sweep_csv(), paths.sweep_txt(),
                                                paths.sweep_chosen()};
    const std::uint64_t key = sweep_key(cfg);
    if (stage_up_to_date(cfg, "sweep", key, artifacts)) {
        std::cout << "[sweep] up to date\n";
        return;
    }

    std::vector<FeatureTable> tables;
    std::vector<DatasetPair> datasets;
    for (const auto& ds : cfg.dataset_names())
        tables.push_back(load_selected_table(cfg, ds, "train"));
    for (std::size_t i = 0; i < tables.size(); ++i)
        datasets.push_back({cfg.dataset_names()[i], &tables[i], nullptr});

    SweepOptions options;
    options.layers = cfg.net_layers;
    options.neurons = cfg.net_neurons;
    options.n_runs = cfg.n_runs;
    options.outer_seed = cfg.seed;
    options.base = base_net_spec(cfg);
    options.workers = cfg.workers;

    const EvalReport report = sweep_mlp(datasets, options);
    fs::create_directories(fs::path(cfg.out_dir) / "sweep");
    report.save_csv(paths.sweep_csv());
    {
        std::ofstream out(paths.sweep_txt(), std::ios::binary);
        out << render_sweep_text(report);
    }
    {
        std::ofstream out(paths.sweep_chosen(), std::ios::binary);
        for (const auto& [ds, model] : report.argmin_by_dataset())
            out << ds << '=' << model << '\n';
    }
    write_stamp(cfg, "sweep", key, artifacts);
    for (const auto& [ds, model] : report.argmin_by_dataset())
        std::cout << "[sweep] " << ds << ": chose " << model << "\n";
}

namespace {

struct KindSpec {
    std::string kind; // "mlp" | "timedelay" | "rnn" | "bagging" | "ols"
    std::string model_name;
    int runs = 1;
};

std::vector<KindSpec> kinds_for(const PipelineConfig& cfg, const NetSpec& mlp_spec) {
    NetSpec td = mlp_spec;
    td.variant = NetVariant::time_delay;
    td.taps = cfg.taps;
    NetSpec rnn = mlp_spec;
    rnn.variant = NetVariant::recurrent;
    return {
        {"mlp", mlp_spec.name(), cfg.n_runs},
        {"timedelay", td.name(), cfg.n_runs},
        {"rnn", rnn.name(), cfg.n_runs},
        {"bagging", "Bagging-T" + std::to_string(cfg.bagging_ntree), cfg.bagging_runs},
        {"ols", "OLS", 1},
    };
}

} // namespace

void stage_train(const PipelineConfig& cfg) {
    const Paths paths(cfg);
    const auto arch = chosen_arch(cfg);

    std::vector<std::string> artifacts;
    for (const auto& ds : cfg.dataset_names()) {
        NetSpec mlp = base_net_spec(cfg);
        std::tie(mlp.n_hidden_layers, mlp.neurons_per_layer) = arch.at(ds);
        for (const auto& k : kinds_for(cfg, mlp)) {
            artifacts.push_back(paths.metrics(ds, k.kind));
            for (int run = 0; run < k.runs; ++run) artifacts.push_back(paths.model(ds, k.kind, run));
        }
    }
    const std::uint64_t key = train_key(cfg);
    if (stage_up_to_date(cfg, "train", key, artifacts)) {
        std::cout << "[train] up to date\n";
        return;
    }

    fs::create_directories(fs::path(cfg.out_dir) / "models");
    for (const auto& ds : cfg.dataset_names()) {
        const FeatureTable train_table = load_selected_table(cfg, ds, "train");

        NetSpec mlp = base_net_spec(cfg);
        std::tie(mlp.n_hidden_layers, mlp.neurons_per_layer) = arch.at(ds);

        for (const auto& k : kinds_for(cfg, mlp)) {
            std::ofstream metrics(paths.metrics(ds, k.kind), std::ios::binary);
            if (!metrics) throw DataError("cannot write " + paths.metrics(ds, k.kind));
            metrics << "kind=" << k.kind << '\n'
                    << "model=" << k.model_name << '\n'
                    << "runs=" << k.runs << '\n';

            for (int run = 0; run < k.runs; ++run) {
                Predictor p;
                double wall = 0.0;
                const std::uint64_t rseed = run_seed(cfg.seed, ds, k.model_name, run);
                const auto t0 = std::chrono::steady_clock::now();
                if (k.kind == "bagging") {
                    p.kind = Predictor::Kind::forest;
                    p.forest = fit_bagging(train_table, cfg.bagging_ntree, cfg.rf_min_leaf, rseed);
                    wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count();
                } else if (k.kind == "ols") {
                    p.kind = Predictor::Kind::linear;
                    p.linear = fit_ols(train_table);
                    wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count();
                } else {
                    NetSpec spec = mlp;
                    if (k.kind == "timedelay") {
                        spec.variant = NetVariant::time_delay;
                        spec.taps = cfg.taps;
                    } else if (k.kind == "rnn") {
                        spec.variant = NetVariant::recurrent;
                    }
                    spec.seed = rseed;
                    p.kind = Predictor::Kind::net;
                    p.net = train(spec, train_table);
                    wall = p.net.train_seconds;
                }
                p.save(paths.model(ds, k.kind, run));

                const auto [tm, tr] =
                    log_scale_metrics(p.predict_log(train_table), train_table.target());
                metrics << "run" << run << ".train_mse=" << format_double(tm) << '\n'
                        << "run" << run << ".train_rmsle=" << format_double(tr) << '\n'
                        << "run" << run << ".wall_seconds=" << format_double(wall) << '\n';
            }
        }
        std::cout << "[train] " << ds << ": trained " << kinds_for(cfg, mlp).size()
                  << " model families\n";
    }
    write_stamp(cfg, "train", key, artifacts);
}

void stage_compare(const PipelineConfig& cfg) {
    const Paths paths(cfg);
    const std::vector<std::string> artifacts = {paths.compare_csv(), paths.compare_txt()};
    const std::uint64_t key = compare_key(cfg);
    if (stage_up_to_date(cfg, "compare", key, artifacts)) {
        std::cout << "[compare] up to date\n";
        return;
    }

    const auto arch = chosen_arch(cfg);
    EvalReport report;

    for (const auto& ds : cfg.dataset_names()) {
        const FeatureTable test_table = load_selected_table(cfg, ds, "test");
        const bool has_test = test_table.n_rows() > 0;

        NetSpec mlp = base_net_spec(cfg);
        std::tie(mlp.n_hidden_layers, mlp.neurons_per_layer) = arch.at(ds);

        for (const auto& k : kinds_for(cfg, mlp)) {
            // Train-phase numbers come from the stored metrics.
            std::ifstream metrics(paths.metrics(ds, k.kind));
            if (!metrics)
                throw DataError("missing train artifact " + paths.metrics(ds, k.kind) +
                                " (run the train stage first)");
            std::map<std::string, std::string> kv;
            std::string line;
            while (std::getline(metrics, line)) {
                line = trim(line);
                const auto eq = line.find('=');
                if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
            }
            const int runs = static_cast<int>(parse_int("runs", kv.at("runs")));

            EvalRow train_row;
            train_row.model = k.model_name;
            train_row.dataset = ds;
            train_row.phase = "train";
            train_row.n_runs = runs;
            std::vector<double> mses;
            double rmsle_sum = 0.0, wall_sum = 0.0;
            for (int run = 0; run < runs; ++run) {
                const std::string p = "run" + std::to_string(run);
                mses.push_back(parse_real(p, kv.at(p + ".train_mse")));
                rmsle_sum += parse_real(p, kv.at(p + ".train_rmsle"));
                wall_sum += parse_real(p, kv.at(p + ".wall_seconds"));
            }
            double mean = 0.0;
            for (double v : mses) mean += v;
            mean /= static_cast<double>(mses.size());
            train_row.mse = mean;
            train_row.rmsle = rmsle_sum / static_cast<double>(runs);
            train_row.wall_time_seconds = wall_sum / static_cast<double>(runs);
            if (runs > 1) {
                double ss = 0.0;
                for (double v : mses) ss += (v - mean) * (v - mean);
                train_row.mse_sd = std::sqrt(ss / static_cast<double>(runs - 1));
            }
            report.rows.push_back(train_row);

            if (!has_test) continue;
            EvalRow test_row = train_row;
            test_row.phase = "test";
            std::vector<double> test_mses;
            double test_rmsle_sum = 0.0, eval_wall_sum = 0.0;
            for (int run = 0; run < runs; ++run) {
                const Predictor p = Predictor::load(paths.model(ds, k.kind, run));
                const auto t0 = std::chrono::steady_clock::now();
                const auto [m, r] = log_scale_metrics(p.predict_log(test_table),
                                                      test_table.target());
                eval_wall_sum +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                test_mses.push_back(m);
                test_rmsle_sum += r;
            }
            double tmean = 0.0;
            for (double v : test_mses) tmean += v;
            tmean /= static_cast<double>(test_mses.size());
            test_row.mse = tmean;
            test_row.rmsle = test_rmsle_sum / static_cast<double>(runs);
            test_row.wall_time_seconds = eval_wall_sum / static_cast<double>(runs);
            test_row.mse_sd = 0.0;
            if (runs > 1) {
                double ss = 0.0;
                for (double v : test_mses) ss += (v - tmean) * (v - tmean);
                test_row.mse_sd = std::sqrt(ss / static_cast<double>(runs - 1));
            }
            report.rows.push_back(test_row);
        }
    }

    fs::create_directories(fs::path(cfg.out_dir) / "compare");
    report.save_csv(paths.compare_csv());
    {
        std::ofstream out(paths.compare_txt(), std::ios::binary);
        out << render_compare_text(report);
    }
    write_stamp(cfg, "compare", key, artifacts);
    std::cout << "[compare] wrote " << paths.compare_txt() << "\n";
}

void stage_predict(const PipelineConfig& cfg) {
    const Paths paths(cfg);
    const std::vector<std::string> artifacts = {paths.predictions()};
    const std::uint64_t key = predict_key(cfg);
    if (stage_up_to_date(cfg, "predict", key, artifacts)) {
        std::cout << "[predict] up to date\n";
        return;
    }

    const std::string ds = effective_predict_dataset(cfg);
    const FeatureTable test_table = load_selected_table(cfg, ds, "test");
    const ZeroSalesIndex zeros = ZeroIO::load(paths.zeros());
    const std::vector<RowMeta> excluded = load_excluded(paths.excluded());
    const Predictor model = Predictor::load(paths.model(ds, cfg.predict_model, 0));

    const auto rows = predict_pipeline(model, test_table, zeros, excluded);
    write_predictions_csv(rows, paths.predictions());
    write_stamp(cfg, "predict", key, artifacts);
    std::cout << "[predict] wrote " << rows.size() << " predictions to " << paths.predictions()
              << "\n";
}

void run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    struct Stage {
        const char* name;
        void (*fn)(const PipelineConfig&);
    };
    const Stage stages[] = {
        {"ingest", stage_ingest},   {"select", stage_select},   {"sweep", stage_sweep},
        {"train", stage_train},     {"compare", stage_compare}, {"predict", stage_predict},
    };
    for (const auto& s : stages) {
        const std::string where = "pipeline stage '" + std::string(s.name) + "': ";
        try {
            s.fn(cfg);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        } catch (const DivergenceError& e) {
            throw DivergenceError(where + e.what());
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        } catch (const Error& e) {
            throw Error(where + e.what());
        }
    }

    const Paths paths(cfg);
    std::ofstream manifest(paths.manifest(), std::ios::binary);
    if (!manifest) throw DataError("cannot write " + paths.manifest());
    manifest << "stormcast_version=" << kVersion << '\n'
             << "seed=" << cfg.seed << '\n'
             << "n_runs=" << cfg.n_runs << '\n'
             << "use_events=" << (cfg.use_events ? "true" : "false") << '\n'
             << "predict.model=" << cfg.predict_model << '\n'
             << "predict.dataset=" << effective_predict_dataset(cfg) << '\n'
             << "stage.ingest=" << hex64(ingest_key(cfg)) << '\n'
             << "stage.select=" << hex64(select_key(cfg)) << '\n';
    if (cfg.sweep_enabled) manifest << "stage.sweep=" << hex64(sweep_key(cfg)) << '\n';
    manifest << "stage.train=" << hex64(train_key(cfg)) << '\n'
             << "stage.compare=" << hex64(compare_key(cfg)) << '\n'
             << "stage.predict=" << hex64(predict_key(cfg)) << '\n';
}

} // namespace stormcast
