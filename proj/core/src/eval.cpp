#include "stormcast/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/forest.hpp"
#include "stormcast/linear.hpp"
#include "stormcast/metrics.hpp"
#include "stormcast/parallel.hpp"
#include "stormcast/rng.hpp"
#include "stormcast/units.hpp"

namespace stormcast {

const EvalRow* EvalReport::find(const std::string& model, const std::string& dataset,
                                const std::string& phase) const {
    for (const auto& r : rows)
        if (r.model == model && r.dataset == dataset && r.phase == phase) return &r;
    return nullptr;
}

std::map<std::string, std::string> EvalReport::argmin_by_dataset() const {
    std::map<std::string, std::string> best;
    std::map<std::string, double> best_mse;
    for (const auto& r : rows) {
        if (r.phase != "train" || r.model.rfind("MLP-", 0) != 0) continue;
        auto it = best_mse.find(r.dataset);
        if (it == best_mse.end() || r.mse < it->second) {
            best_mse[r.dataset] = r.mse;
            best[r.dataset] = r.model;
        }
    }
    return best;
}

void EvalReport::save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "model,dataset,phase,mse,rmsle,wall_time_seconds,n_runs,mse_sd\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.dataset << ',' << r.phase << ',' << format_double(r.mse)
            << ',' << format_double(r.rmsle) << ',' << format_double(r.wall_time_seconds) << ','
            << r.n_runs << ',' << format_double(r.mse_sd) << '\n';
}

std::uint64_t run_seed(std::uint64_t outer_seed, const std::string& dataset,
                       const std::string& model_name, int run) {
    return mix_seed({outer_seed, fnv1a(dataset.data(), dataset.size()),
                     fnv1a(model_name.data(), model_name.size()),
                     static_cast<std::uint64_t>(run)});
}

std::pair<double, double> log_scale_metrics(const Eigen::VectorXd& pred_log,
                                            const Eigen::VectorXd& target_log) {
    const double m = mse(pred_log, target_log);
    Eigen::VectorXd pred_units(pred_log.size()), actual_units(target_log.size());
    for (Eigen::Index i = 0; i < pred_log.size(); ++i) {
        pred_units(i) = expm1_pred(pred_log(i));
        actual_units(i) = std::expm1(target_log(i));
    }
    return {m, rmsle(pred_units, actual_units)};
}

namespace {

struct RunStats {
    std::vector<double> mse, rmsle_v, wall;

    void add(double m, double r, double w) {
        mse.push_back(m);
        rmsle_v.push_back(r);
        wall.push_back(w);
    }

    EvalRow to_row(const std::string& model, const std::string& dataset,
                   const std::string& phase) const {
        EvalRow row;
        row.model = model;
        row.dataset = dataset;
        row.phase = phase;
        row.n_runs = static_cast<int>(mse.size());
        double sum = 0.0;
        for (double v : mse) sum += v;
        row.mse = sum / static_cast<double>(mse.size());
        sum = 0.0;
        for (double v : rmsle_v) sum += v;
        row.rmsle = sum / static_cast<double>(rmsle_v.size());
        sum = 0.0;
        for (double v : wall) sum += v;
        row.wall_time_seconds = sum / static_cast<double>(wall.size());
        if (mse.size() > 1) {
            double ss = 0.0;
            for (double v : mse) ss += (v - row.mse) * (v - row.mse);
            row.mse_sd = std::sqrt(ss / static_cast<double>(mse.size() - 1));
        }
        return row;
    }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

EvalReport sweep_mlp(const std::vector<DatasetPair>& datasets, const SweepOptions& options) {
    if (datasets.empty()) throw ConfigError("sweep: no datasets");
    if (options.layers.empty() || options.neurons.empty())
        throw ConfigError("sweep: empty architecture grid");
    if (options.n_runs < 1) throw ConfigError("sweep: n_runs must be positive");

    struct Cell {
        std::size_t dataset;
        int layers;
        int neurons;
    };
    std::vector<Cell> cells;
    for (std::size_t d = 0; d < datasets.size(); ++d)
        for (int l : options.layers)
            for (int n : options.neurons) cells.push_back({d, l, n});

    std::vector<EvalRow> rows(cells.size());
    parallel_for(
        cells.size(),
        [&](std::size_t c) {
            const Cell& cell = cells[c];
            const DatasetPair& ds = datasets[cell.dataset];
            NetSpec spec = options.base;
            spec.variant = NetVariant::plain;
            spec.n_hidden_layers = cell.layers;
            spec.neurons_per_layer = cell.neurons;
            RunStats stats;
            for (int run = 0; run < options.n_runs; ++run) {
                spec.seed = run_seed(options.outer_seed, ds.name, spec.name(), run);
                const NetModel model = train(spec, *ds.train);
                const auto [m, r] =
                    log_scale_metrics(predict_net(model, *ds.train), ds.train->target());
                stats.add(m, r, model.train_seconds);
            }
            rows[c] = stats.to_row(spec.name(), ds.name, "train");
        },
        options.workers);

    EvalReport report;
    report.rows = std::move(rows);
    return report;
}

EvalReport compare_models(const std::vector<DatasetPair>& datasets,
                          const CompareOptions& options) {
    if (datasets.empty()) throw ConfigError("compare: no datasets");

    enum Kind { kMlp, kTimeDelay, kRecurrent, kBagging, kOls };
    struct Task {
        std::size_t dataset;
        Kind kind;
    };
    std::vector<Task> tasks;
    for (std::size_t d = 0; d < datasets.size(); ++d)
        for (Kind k : {kMlp, kTimeDelay, kRecurrent, kBagging, kOls}) tasks.push_back({d, k});

    // Two slots (train, test) per task; test left empty when absent.
    std::vector<std::vector<EvalRow>> slots(tasks.size());
    parallel_for(
        tasks.size(),
        [&](std::size_t ti) {
            const Task& task = tasks[ti];
            const DatasetPair& ds = datasets[task.dataset];
            const bool has_test = ds.test != nullptr && ds.test->n_rows() > 0;
            auto chosen = options.chosen_mlp.find(ds.name);
            if (chosen == options.chosen_mlp.end())
                throw ConfigError("compare: no chosen MLP spec for dataset '" + ds.name + "'");

            RunStats train_stats, test_stats;
            std::string name;

            if (task.kind == kBagging) {
                name = "Bagging-T" + std::to_string(options.ntree_bagging);
                for (int run = 0; run < options.n_bagging_runs; ++run) {
                    const auto t0 = std::chrono::steady_clock::now();
                    const ForestModel model =
                        fit_bagging(*ds.train, options.ntree_bagging, options.min_leaf,
                                    run_seed(options.outer_seed, ds.name, name, run));
                    const double wall = seconds_since(t0);
                    const auto [tm, tr] =
                        log_scale_metrics(model.predict(ds.train->rows()), ds.train->target());
                    train_stats.add(tm, tr, wall);
                    if (has_test) {
                        const auto e0 = std::chrono::steady_clock::now();
                        const auto [sm, sr] =
                            log_scale_metrics(model.predict(ds.test->rows()), ds.test->target());
                        test_stats.add(sm, sr, seconds_since(e0));
                    }
                }
            } else if (task.kind == kOls) {
                name = "OLS";
                const auto t0 = std::chrono::steady_clock::now();
                const LinearModel model = fit_ols(*ds.train);
                const double wall = seconds_since(t0);
                const auto [tm, tr] =
                    log_scale_metrics(model.predict(*ds.train), ds.train->target());
                train_stats.add(tm, tr, wall);
                if (has_test) {
                    const auto e0 = std::chrono::steady_clock::now();
                    const auto [sm, sr] =
                        log_scale_metrics(model.predict(*ds.test), ds.test->target());
                    test_stats.add(sm, sr, seconds_since(e0));
                }
            } else {
                NetSpec spec = chosen->second;
                switch (task.kind) {
                    case kMlp:
                        spec.variant = NetVariant::plain;
                        break;
                    case kTimeDelay:
                        spec.variant = NetVariant::time_delay;
                        spec.taps = options.taps;
                        break;
                    case kRecurrent:
                        spec.variant = NetVariant::recurrent;
                        break;
                    default:
                        break;
                }
                name = spec.name();
                for (int run = 0; run < options.n_runs; ++run) {
                    spec.seed = run_seed(options.outer_seed, ds.name, name, run);
                    const NetModel model = train(spec, *ds.train);
                    const auto [tm, tr] =
                        log_scale_metrics(predict_net(model, *ds.train), ds.train->target());
                    train_stats.add(tm, tr, model.train_seconds);
                    if (has_test) {
                        const auto e0 = std::chrono::steady_clock::now();
                        const auto [sm, sr] =
                            log_scale_metrics(predict_net(model, *ds.test), ds.test->target());
                        test_stats.add(sm, sr, seconds_since(e0));
                    }
                }
            }

            slots[ti].push_back(train_stats.to_row(name, ds.name, "train"));
            if (!test_stats.mse.empty())
                slots[ti].push_back(test_stats.to_row(name, ds.name, "test"));
        },
        options.workers);

    EvalReport report;
    for (auto& s : slots)
        for (auto& r : s) report.rows.push_back(std::move(r));
    return report;
}

namespace {

std::string fixed(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return std::string(buf);
}

void pad(std::string& s, std::size_t width) {
    while (s.size() < width) s.push_back(' ');
}

} // namespace

std::string render_sweep_text(const EvalReport& report) {
    std::vector<std::string> datasets, models;
    for (const auto& r : report.rows) {
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
            datasets.push_back(r.dataset);
        if (std::find(models.begin(), models.end(), r.model) == models.end())
            models.push_back(r.model);
    }
    const auto argmin = report.argmin_by_dataset();

    std::string out;
    std::string head = "Methodology";
    pad(head, 18);
    for (const auto& d : datasets) {
        std::string col = d + " MSE";
        pad(col, 16);
        head += col;
        col = "Time(s)";
        pad(col, 12);
        head += col;
    }
    out += head + '\n';
    for (const auto& m : models) {
        std::string line = m;
        pad(line, 18);
        for (const auto& d : datasets) {
            const EvalRow* r = report.find(m, d, "train");
            std::string cell;
            if (r) {
                cell = fixed(r->mse, 6);
                auto best = argmin.find(d);
                if (best != argmin.end() && best->second == m) cell += " *";
            } else {
                cell = "-";
            }
            pad(cell, 16);
            line += cell;
            cell = r ? fixed(r->wall_time_seconds, 3) : "-";
            pad(cell, 12);
            line += cell;
        }
        out += line + '\n';
    }
    out += "(* lowest train MSE per dataset)\n";
    return out;
}

std::string render_compare_text(const EvalReport& report) {
    std::vector<std::string> datasets, models;
    for (const auto& r : report.rows) {
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
            datasets.push_back(r.dataset);
    }
    std::string out;
    for (const auto& d : datasets) {
        models.clear();
        for (const auto& r : report.rows)
            if (r.dataset == d &&
                std::find(models.begin(), models.end(), r.model) == models.end())
                models.push_back(r.model);

        out += "== " + d + " ==\n";
        std::string head = "Model";
        pad(head, 22);
        for (const char* c : {"Train MSE", "Time(s)", "Test MSE", "Time(s)"}) {
            std::string col = c;
            pad(col, 14);
            head += col;
        }
        out += head + '\n';
        for (const auto& m : models) {
            std::string line = m;
            pad(line, 22);
            const EvalRow* train_row = report.find(m, d, "train");
            const EvalRow* test_row = report.find(m, d, "test");
            for (const EvalRow* r : {train_row, test_row}) {
                std::string cell = r ? fixed(r->mse, 6) : "-";
                pad(cell, 14);
                line += cell;
                cell = r ? fixed(r->wall_time_seconds, 3) : "-";
                pad(cell, 14);
                line += cell;
            }
            out += line + '\n';
        }
        out += '\n';
    }
    return out;
}

} // namespace stormcast
