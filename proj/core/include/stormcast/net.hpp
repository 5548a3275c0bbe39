#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "stormcast/feature_table.hpp"
#include "stormcast/standardize.hpp"

namespace stormcast {

enum class NetVariant { plain, time_delay, recurrent };

/// Architecture and training recipe for one network. The naming scheme is
/// MLP-L{layers}-N{neurons}, with TD-/RNN- prefixes for the variants.
struct NetSpec {
    int n_hidden_layers = 2; // 2..4, uniform width
    int neurons_per_layer = 20;
    double learning_rate = 0.05;
    int epochs = 200;
    int batch_size = 128;
    std::uint64_t seed = 1;
    NetVariant variant = NetVariant::plain;
    int taps = 0; // time_delay only

    // Stop when train MSE has improved by less than early_stop_tol for
    // early_stop_patience consecutive epochs. patience <= 0 disables.
    double early_stop_tol = 1e-6;
    int early_stop_patience = 10;

    // Gradient truncation horizon for recurrent training.
    int bptt_window = 16;

    void validate() const;
    std::string name() const;
};

/// Trained perceptron: sigmoid hidden layers, identity output, optional
/// Elman context on the first hidden layer. Inputs are standardized (and
/// delay-expanded for the time-delay variant) before hitting weights[0].
class NetModel {
public:
    NetSpec spec;
    Standardizer standardizer;
    std::vector<Eigen::MatrixXd> weights; // hidden layers then the output row
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd context_weights; // recurrent: first-hidden x first-hidden

    double final_train_mse = 0.0;
    double train_seconds = 0.0;
    int epochs_run = 0;

    // Width of the vector weights[0] consumes.
    Eigen::Index input_width() const { return weights.empty() ? 0 : weights[0].cols(); }
    Eigen::Index hidden_width() const { return weights.empty() ? 0 : weights[0].rows(); }

    void save(const std::string& path) const;
    static NetModel load(const std::string& path);
};

// Feed-forward pass on an already standardized (and, for time-delay,
// already expanded) input vector. Output is on the log1p scale.
double forward(const NetModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// One Elman step: the first hidden layer also receives context_weights *
// h_prev; returns the prediction and the new context (that layer's output).
std::pair<double, Eigen::VectorXd> recurrent_step(const NetModel& model,
                                                  const Eigen::Ref<const Eigen::VectorXd>& x,
                                                  const Eigen::Ref<const Eigen::VectorXd>& h_prev);

// Rows of one (store, item) series, strictly date-ordered, concatenated with
// their `taps` predecessors; positions before the series start are
// zero-padded. Applied per series across a whole table; lag columns are named
// <col>_lag<k>.
FeatureTable expand_time_delay(const FeatureTable& table, int taps);

// Contiguous [begin, end) runs of one (store, item) pair, date-ascending.
// Errors if a series is out of order or split into separate runs.
std::vector<std::pair<std::size_t, std::size_t>> series_ranges(const FeatureTable& table);

// Mini-batch SGD on the log1p target. Throws DivergenceError when the
// epoch loss goes non-finite.
NetModel train(const NetSpec& spec, const FeatureTable& table);

// Predictions (log1p scale) for a table with the model's training schema.
// Recurrent models reset context at every series start.
Eigen::VectorXd predict_net(const NetModel& model, const FeatureTable& table);

// Untrained model with the seeded initialization train() starts from.
NetModel init_net(const NetSpec& spec, const FeatureTable& table);

// Max relative disagreement between the backprop gradient of the full-batch
// MSE and central finite differences, over n_params_sampled parameters.
// Recurrent gradients are computed with the window spanning each full series
// so the comparison is against the exact gradient.
double gradient_check(const NetSpec& spec, const FeatureTable& table,
                      std::size_t n_params_sampled = 200, double h = 1e-5);

// Full-batch MSE and its gradient flattened in gradient_check's parameter
// order: per layer the weight matrix row-major then the bias, context last.
std::pair<double, std::vector<double>> net_loss_gradient(const NetModel& model,
                                                         const FeatureTable& table);

} // namespace stormcast
