// stormcast CLI: synthetic fixtures, ingestion, feature selection, training,
// comparison, and prediction for weather-sensitive retail demand.

#include <CLI11.hpp>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "stormcast/errors.hpp"
#include "stormcast/pipeline.hpp"
#include "stormcast/synth.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides; // key=value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path,
                    "Flat key=value config file (dotted keys)");
    cmd->add_option("-D,--set", opts.overrides,
                    "Override a config key, e.g. -D seed=7 -D net.epochs=50");
}

stormcast::PipelineConfig make_config(const CommonOpts& opts) {
    stormcast::PipelineConfig cfg;
    if (!opts.config_path.empty())
        cfg = stormcast::PipelineConfig::from_file(opts.config_path);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw stormcast::ConfigError("override must look like key=value: '" + kv + "'");
        cfg.set_key(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const stormcast::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const stormcast::DivergenceError& e) {
        std::cerr << "numeric divergence: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const stormcast::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stormcast: demand forecasting for weather-sensitive retail products"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sales/weather fixture");
    stormcast::SynthSpec synth_spec;
    std::string synth_out = "synth_out";
    std::string synth_start = "2012-01-01", synth_end = "2012-06-30";
    std::vector<std::string> informative, informative_events;
    synth_cmd->add_option("-o,--out", synth_out, "Output directory");
    synth_cmd->add_option("--seed", synth_spec.seed, "Generator seed");
    synth_cmd->add_option("--stores", synth_spec.n_stores, "Number of stores");
    synth_cmd->add_option("--items", synth_spec.n_items, "Number of items");
    synth_cmd->add_option("--stations", synth_spec.n_stations, "Number of weather stations");
    synth_cmd->add_option("--start", synth_start, "First date (YYYY-MM-DD)");
    synth_cmd->add_option("--end", synth_end, "Last date (YYYY-MM-DD)");
    synth_cmd->add_option("--informative", informative,
                          "Informative weather column as col:beta (repeatable)");
    synth_cmd->add_option("--informative-event", informative_events,
                          "Informative event flag as flag:beta (repeatable)");
    synth_cmd->add_option("--noise-sd", synth_spec.noise_sd, "Log-scale noise SD");
    synth_cmd->add_option("--missing-rate", synth_spec.missing_rate,
                          "Probability a weather cell is written as M");
    synth_cmd->add_option("--dead-pair-rate", synth_spec.dead_pair_rate,
                          "Fraction of (store,item) pairs with all-zero units");
    synth_cmd->add_flag("--nonlinear", synth_spec.nonlinear,
                        "Add a product term of the first two informative columns");
    synth_cmd->add_option("--product-beta", synth_spec.product_beta,
                          "Coefficient of the product term");

    // ---- pipeline subcommands ----
    CommonOpts run_opts, ingest_opts, select_opts, sweep_opts, train_opts, compare_opts,
        predict_opts;
    auto* run_cmd = app.add_subcommand("run", "Run the full pipeline");
    add_common(run_cmd, run_opts);
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse, join, impute, and split the tables");
    add_common(ingest_cmd, ingest_opts);
    auto* select_cmd =
        app.add_subcommand("select", "Random-forest importance and feature selection");
    add_common(select_cmd, select_opts);
    auto* sweep_cmd = app.add_subcommand("sweep", "MLP architecture sweep");
    add_common(sweep_cmd, sweep_opts);
    auto* train_cmd = app.add_subcommand("train", "Train the chosen models");
    add_common(train_cmd, train_opts);
    auto* compare_cmd = app.add_subcommand("compare", "Train/test comparison table");
    add_common(compare_cmd, compare_opts);
    auto* predict_cmd = app.add_subcommand("predict", "Write the prediction CSV");
    add_common(predict_cmd, predict_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (synth_cmd->parsed()) {
        return guarded([&] {
            auto parse_effects = [](const std::vector<std::string>& items,
                                    std::vector<std::string>& cols, std::vector<double>& betas) {
                for (const auto& item : items) {
                    const auto colon = item.find(':');
                    if (colon == std::string::npos)
                        throw stormcast::ConfigError("expected col:beta, got '" + item + "'");
                    cols.push_back(item.substr(0, colon));
                    betas.push_back(std::stod(item.substr(colon + 1)));
                }
            };
            parse_effects(informative, synth_spec.informative_weather,
                          synth_spec.weather_effects);
            parse_effects(informative_events, synth_spec.informative_events,
                          synth_spec.event_effects);
            synth_spec.start = stormcast::CalendarDate::parse(synth_start);
            synth_spec.end = stormcast::CalendarDate::parse(synth_end);
            const auto paths = stormcast::generate(synth_spec, synth_out);
            std::cout << "wrote " << paths.sales << ", " << paths.weather << ", " << paths.key
                      << ", " << paths.manifest << "\n";
        });
    }

    struct StageCmd {
        CLI::App* cmd;
        CommonOpts* opts;
        void (*fn)(const stormcast::PipelineConfig&);
    };
    const StageCmd stage_cmds[] = {
        {ingest_cmd, &ingest_opts, stormcast::stage_ingest},
        {select_cmd, &select_opts, stormcast::stage_select},
        {sweep_cmd, &sweep_opts, stormcast::stage_sweep},
        {train_cmd, &train_opts, stormcast::stage_train},
        {compare_cmd, &compare_opts, stormcast::stage_compare},
        {predict_cmd, &predict_opts, stormcast::stage_predict},
    };
    for (const auto& sc : stage_cmds) {
        if (sc.cmd->parsed()) {
            return guarded([&] {
                const auto cfg = make_config(*sc.opts);
                cfg.validate();
                sc.fn(cfg);
            });
        }
    }
    if (run_cmd->parsed()) {
        return guarded([&] { stormcast::run_pipeline(make_config(run_opts)); });
    }
    return kExitConfig;
}
