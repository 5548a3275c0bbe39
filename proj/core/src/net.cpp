#include "stormcast/net.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <utility>

#include "stormcast/csv.hpp"
#include "stormcast/errors.hpp"
#include "stormcast/rng.hpp"

namespace stormcast {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd context;

    static Gradients zeros_like(const NetModel& m) {
        Gradients g;
        for (const auto& w : m.weights) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        for (const auto& b : m.biases) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
        if (m.context_weights.size() > 0)
            g.context = Eigen::MatrixXd::Zero(m.context_weights.rows(), m.context_weights.cols());
        return g;
    }
};

void apply_update(NetModel& m, const Gradients& g, double lr) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        m.weights[l].noalias() -= lr * g.weights[l];
        m.biases[l] -= lr * g.biases[l];
    }
    if (m.context_weights.size() > 0) m.context_weights.noalias() -= lr * g.context;
}

// Forward + backward over a standardized (and expanded) batch for the
// feed-forward variants. Returns the batch sum of squared errors; gradients
// are of (scale * SSE_batch), so scale = 1/B gives the batch-MSE gradient.
double batch_backprop(const NetModel& m, const Eigen::MatrixXd& xb, const Eigen::VectorXd& yb,
                      double scale, Gradients& g) {
    const std::size_t n_hidden = m.weights.size() - 1;
    std::vector<Eigen::MatrixXd> acts(n_hidden);
    const Eigen::MatrixXd* prev = &xb;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        acts[l] = sigmoid(((*prev) * m.weights[l].transpose()).rowwise() +
                          m.biases[l].transpose());
        prev = &acts[l];
    }
    const Eigen::VectorXd preds =
        (*prev) * m.weights[n_hidden].transpose() + Eigen::VectorXd::Constant(xb.rows(), m.biases[n_hidden](0));

    const Eigen::VectorXd resid = preds - yb;
    const double sse = resid.squaredNorm();

    Eigen::VectorXd dy = (2.0 * scale) * resid;
    g.weights[n_hidden].noalias() += dy.transpose() * (*prev);
    g.biases[n_hidden](0) += dy.sum();

    Eigen::MatrixXd da = dy * m.weights[n_hidden]; // B x H
    for (std::size_t l = n_hidden; l-- > 0;) {
        const Eigen::MatrixXd dz =
            (da.array() * acts[l].array() * (1.0 - acts[l].array())).matrix();
        const Eigen::MatrixXd& below = (l == 0) ? xb : acts[l - 1];
        g.weights[l].noalias() += dz.transpose() * below;
        g.biases[l] += dz.colwise().sum().transpose();
        if (l > 0) da = dz * m.weights[l];
    }
    return sse;
}

// BPTT over one window of a series. h carries the entering context and is
// left holding the context after the window's last step. Gradients are of
// (scale * SSE_window).
double window_backprop(const NetModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       std::size_t begin, std::size_t end, Eigen::VectorXd& h, double scale,
                       Gradients& g) {
    const std::size_t n_hidden = m.weights.size() - 1;
    const std::size_t steps = end - begin;
    std::vector<std::vector<Eigen::VectorXd>> acts(steps);
    std::vector<Eigen::VectorXd> h_in(steps);
    std::vector<double> preds(steps);

    for (std::size_t t = 0; t < steps; ++t) {
        const Eigen::Index row = static_cast<Eigen::Index>(begin + t);
        h_in[t] = h;
        Eigen::VectorXd a = sigmoid_vec(m.weights[0] * x.row(row).transpose() +
                                        m.context_weights * h + m.biases[0]);
        h = a;
        acts[t].push_back(a);
        for (std::size_t l = 1; l < n_hidden; ++l) {
            a = sigmoid_vec(m.weights[l] * a + m.biases[l]);
            acts[t].push_back(a);
        }
        preds[t] = (m.weights[n_hidden] * a)(0) + m.biases[n_hidden](0);
    }

    double sse = 0.0;
    Eigen::VectorXd dz1_next; // first-hidden dz from step t+1
    for (std::size_t t = steps; t-- > 0;) {
        const Eigen::Index row = static_cast<Eigen::Index>(begin + t);
        const double resid = preds[t] - y(row);
        sse += resid * resid;
        const double dy = 2.0 * scale * resid;

        g.weights[n_hidden].noalias() += dy * acts[t][n_hidden - 1].transpose();
        g.biases[n_hidden](0) += dy;

        Eigen::VectorXd da = dy * m.weights[n_hidden].transpose();
        for (std::size_t l = n_hidden; l-- > 1;) {
            const Eigen::VectorXd dz =
                (da.array() * acts[t][l].array() * (1.0 - acts[t][l].array())).matrix();
            g.weights[l].noalias() += dz * acts[t][l - 1].transpose();
            g.biases[l] += dz;
            da = m.weights[l].transpose() * dz;
        }
        if (dz1_next.size() > 0) da += m.context_weights.transpose() * dz1_next;
        const Eigen::VectorXd dz1 =
            (da.array() * acts[t][0].array() * (1.0 - acts[t][0].array())).matrix();
        g.weights[0].noalias() += dz1 * x.row(row);
        g.context.noalias() += dz1 * h_in[t].transpose();
        g.biases[0] += dz1;
        dz1_next = dz1;
    }
    return sse;
}

Eigen::VectorXd forward_batch(const NetModel& m, const Eigen::Ref<const Eigen::MatrixXd>& xb) {
    const std::size_t n_hidden = m.weights.size() - 1;
    Eigen::MatrixXd a = xb;
    for (std::size_t l = 0; l < n_hidden; ++l)
        a = sigmoid((a * m.weights[l].transpose()).rowwise() + m.biases[l].transpose());
    return a * m.weights[n_hidden].transpose() +
           Eigen::VectorXd::Constant(xb.rows(), m.biases[n_hidden](0));
}

Eigen::VectorXd forward_recurrent(const NetModel& m, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
    Eigen::VectorXd preds(x.rows());
    for (const auto& [begin, end] : ranges) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(m.hidden_width());
        for (std::size_t i = begin; i < end; ++i) {
            auto [p, h_next] = recurrent_step(m, x.row(static_cast<Eigen::Index>(i)).transpose(), h);
            preds(static_cast<Eigen::Index>(i)) = p;
            h = std::move(h_next);
        }
    }
    return preds;
}

// Expand [begin, end) of a series matrix into tapped rows (zero padding
// before the series start).
void expand_series_into(const Eigen::Ref<const Eigen::MatrixXd>& x, std::size_t begin,
                        std::size_t end, int taps, Eigen::MatrixXd& out) {
    const Eigen::Index d = x.cols();
    for (std::size_t i = begin; i < end; ++i) {
        for (int k = 0; k <= taps; ++k) {
            const std::int64_t src = static_cast<std::int64_t>(i) - k;
            auto block = out.block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k) * d, 1, d);
            if (src < static_cast<std::int64_t>(begin))
                block.setZero();
            else
                block = x.row(static_cast<Eigen::Index>(src));
        }
    }
}

Eigen::MatrixXd expand_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const std::vector<std::pair<std::size_t, std::size_t>>& ranges,
                              int taps) {
    if (taps == 0) return x;
    Eigen::MatrixXd out(x.rows(), x.cols() * (taps + 1));
    for (const auto& [begin, end] : ranges) expand_series_into(x, begin, end, taps, out);
    return out;
}

// The standardized, variant-expanded training design matrix plus the series
// layout; everything train/predict/gradient_check share.
struct NetInputs {
    Eigen::MatrixXd x;
    std::vector<std::pair<std::size_t, std::size_t>> ranges; // recurrent only
};

NetInputs prepare_inputs(const NetModel& model, const FeatureTable& table) {
    NetInputs in;
    Eigen::MatrixXd xs = model.standardizer.apply(table.rows());
    switch (model.spec.variant) {
        case NetVariant::plain:
            in.x = std::move(xs);
            break;
        case NetVariant::time_delay:
            in.x = expand_matrix(xs, series_ranges(table), model.spec.taps);
            break;
        case NetVariant::recurrent:
            in.ranges = series_ranges(table);
            in.x = std::move(xs);
            break;
    }
    return in;
}

double full_loss(const NetModel& m, const NetInputs& in, const Eigen::VectorXd& y) {
    const Eigen::VectorXd preds = m.spec.variant == NetVariant::recurrent
                                      ? forward_recurrent(m, in.x, in.ranges)
                                      : forward_batch(m, in.x);
    return (preds - y).squaredNorm() / static_cast<double>(y.size());
}

// Gradient of the full-table MSE. Recurrent series are unrolled in full, so
// this is the exact gradient for every variant.
Gradients full_gradient(const NetModel& m, const NetInputs& in, const Eigen::VectorXd& y) {
    Gradients g = Gradients::zeros_like(m);
    const double scale = 1.0 / static_cast<double>(y.size());
    if (m.spec.variant == NetVariant::recurrent) {
        for (const auto& [begin, end] : in.ranges) {
            Eigen::VectorXd h = Eigen::VectorXd::Zero(m.hidden_width());
            window_backprop(m, in.x, y, begin, end, h, scale, g);
        }
    } else {
        batch_backprop(m, in.x, y, scale, g);
    }
    return g;
}

std::size_t param_count(const NetModel& m) {
    std::size_t n = 0;
    for (const auto& w : m.weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : m.biases) n += static_cast<std::size_t>(b.size());
    n += static_cast<std::size_t>(m.context_weights.size());
    return n;
}

// Flat parameter view: weights/biases layer by layer (row-major), context
// last. The same order is used for the analytic gradient.
double& param_ref(NetModel& m, std::size_t idx) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        auto& w = m.weights[l];
        const std::size_t wn = static_cast<std::size_t>(w.size());
        if (idx < wn) {
            const Eigen::Index r = static_cast<Eigen::Index>(idx) / w.cols();
            const Eigen::Index c = static_cast<Eigen::Index>(idx) % w.cols();
            return w(r, c);
        }
        idx -= wn;
        auto& b = m.biases[l];
        const std::size_t bn = static_cast<std::size_t>(b.size());
        if (idx < bn) return b(static_cast<Eigen::Index>(idx));
        idx -= bn;
    }
    auto& ctx = m.context_weights;
    const Eigen::Index r = static_cast<Eigen::Index>(idx) / ctx.cols();
    const Eigen::Index c = static_cast<Eigen::Index>(idx) % ctx.cols();
    return ctx(r, c);
}

std::vector<double> flatten(const Gradients& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        const auto& w = g.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) out.push_back(w(i, j));
        for (Eigen::Index i = 0; i < g.biases[l].size(); ++i) out.push_back(g.biases[l](i));
    }
    for (Eigen::Index i = 0; i < g.context.rows(); ++i)
        for (Eigen::Index j = 0; j < g.context.cols(); ++j) out.push_back(g.context(i, j));
    return out;
}

} // namespace

void NetSpec::validate() const {
    if (n_hidden_layers < 2 || n_hidden_layers > 4)
        throw ConfigError("net: n_hidden_layers must be 2..4");
    if (neurons_per_layer < 1) throw ConfigError("net: neurons_per_layer must be positive");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
        throw ConfigError("net: learning_rate must be positive");
    if (epochs < 0) throw ConfigError("net: epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("net: batch_size must be positive");
    if (taps < 0) throw ConfigError("net: taps must be non-negative");
    if (bptt_window < 1) throw ConfigError("net: bptt_window must be positive");
}

std::string NetSpec::name() const {
    std::string base = "L" + std::to_string(n_hidden_layers) + "-N" +
                       std::to_string(neurons_per_layer);
    switch (variant) {
        case NetVariant::plain: return "MLP-" + base;
        case NetVariant::time_delay: return "TD-" + base + "-taps" + std::to_string(taps);
        case NetVariant::recurrent: return "RNN-" + base;
    }
    return base;
}

std::vector<std::pair<std::size_t, std::size_t>> series_ranges(const FeatureTable& table) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto& meta = table.meta();
    std::set<std::pair<int, int>> closed;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= meta.size(); ++i) {
        const bool boundary = i == meta.size() || meta[i].store != meta[begin].store ||
                              meta[i].item != meta[begin].item;
        if (!boundary) {
            if (!(meta[i - 1].date < meta[i].date))
                throw DataError("series for store " + std::to_string(meta[begin].store) +
                                " item " + std::to_string(meta[begin].item) +
                                " is not strictly date-ordered");
            continue;
        }
        if (!closed.insert({meta[begin].store, meta[begin].item}).second)
            throw DataError("rows for store " + std::to_string(meta[begin].store) + " item " +
                            std::to_string(meta[begin].item) + " are not contiguous");
        out.emplace_back(begin, i);
        begin = i;
    }
    return out;
}

FeatureTable expand_time_delay(const FeatureTable& table, int taps) {
    if (taps < 0) throw ConfigError("expand_time_delay: taps must be non-negative");
    const auto ranges = series_ranges(table);
    if (taps == 0) return table;
    std::vector<std::string> cols = table.column_names();
    for (int k = 1; k <= taps; ++k)
        for (const auto& c : table.column_names()) cols.push_back(c + "_lag" + std::to_string(k));
    Eigen::MatrixXd x(table.rows().rows(), table.rows().cols() * (taps + 1));
    for (const auto& [begin, end] : ranges) expand_series_into(table.rows(), begin, end, taps, x);
    return FeatureTable(std::move(cols), std::move(x), table.target(), table.meta());
}

double forward(const NetModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != model.input_width())
        throw DataError("net forward: input width " + std::to_string(x.size()) +
                        " does not match model width " + std::to_string(model.input_width()));
    const std::size_t n_hidden = model.weights.size() - 1;
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < n_hidden; ++l)
        a = sigmoid_vec(model.weights[l] * a + model.biases[l]);
    return (model.weights[n_hidden] * a)(0) + model.biases[n_hidden](0);
}

std::pair<double, Eigen::VectorXd> recurrent_step(
    const NetModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
    const Eigen::Ref<const Eigen::VectorXd>& h_prev) {
    if (x.size() != model.input_width())
        throw DataError("recurrent_step: input width mismatch");
    if (h_prev.size() != model.hidden_width())
        throw DataError("recurrent_step: context width mismatch");
    const std::size_t n_hidden = model.weights.size() - 1;
    Eigen::VectorXd h =
        sigmoid_vec(model.weights[0] * x + model.context_weights * h_prev + model.biases[0]);
    Eigen::VectorXd a = h;
    for (std::size_t l = 1; l < n_hidden; ++l)
        a = sigmoid_vec(model.weights[l] * a + model.biases[l]);
    const double pred = (model.weights[n_hidden] * a)(0) + model.biases[n_hidden](0);
    return {pred, std::move(h)};
}

NetModel init_net(const NetSpec& spec, const FeatureTable& table) {
    spec.validate();
    if (table.n_rows() == 0) throw DataError("net: empty training table");

    NetModel m;
    m.spec = spec;
    m.standardizer = Standardizer::fit(table);

    Eigen::Index in_width = static_cast<Eigen::Index>(m.standardizer.n_kept());
    if (spec.variant == NetVariant::time_delay) in_width *= spec.taps + 1;
    const Eigen::Index h = spec.neurons_per_layer;

    Rng rng(mix_seed({spec.seed, 7}));
    auto init_matrix = [&rng](Eigen::Index rows, Eigen::Index cols) {
        const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-r, r);
        return w;
    };

    Eigen::Index prev = in_width;
    for (int l = 0; l < spec.n_hidden_layers; ++l) {
        m.weights.push_back(init_matrix(h, prev));
        m.biases.push_back(Eigen::VectorXd::Zero(h));
        if (l == 0 && spec.variant == NetVariant::recurrent)
            m.context_weights = init_matrix(h, h);
        prev = h;
    }
    m.weights.push_back(init_matrix(1, prev));
    m.biases.push_back(Eigen::VectorXd::Zero(1));
    return m;
}

NetModel train(const NetSpec& spec, const FeatureTable& table) {
    const auto start_time = std::chrono::steady_clock::now();
    NetModel m = init_net(spec, table);
    const NetInputs in = prepare_inputs(m, table);
    const Eigen::VectorXd& y = table.target();
    const std::size_t n = table.n_rows();

    Rng shuffle_rng(mix_seed({spec.seed, 8}));
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    int epoch = 0;

    for (; epoch < spec.epochs; ++epoch) {
        if (m.spec.variant == NetVariant::recurrent) {
            std::vector<std::size_t> order(in.ranges.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            shuffle_rng.shuffle(order);
            for (std::size_t s : order) {
                const auto [begin, end] = in.ranges[s];
                Eigen::VectorXd h = Eigen::VectorXd::Zero(m.hidden_width());
                for (std::size_t w = begin; w < end;
                     w += static_cast<std::size_t>(spec.bptt_window)) {
                    const std::size_t stop =
                        std::min(end, w + static_cast<std::size_t>(spec.bptt_window));
                    Gradients g = Gradients::zeros_like(m);
                    window_backprop(m, in.x, y, w, stop, h, 1.0 / static_cast<double>(stop - w),
                                    g);
                    apply_update(m, g, spec.learning_rate);
                }
            }
        } else {
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            shuffle_rng.shuffle(order);
            const std::size_t bs = static_cast<std::size_t>(spec.batch_size);
            Eigen::MatrixXd xb;
            Eigen::VectorXd yb;
            for (std::size_t ofs = 0; ofs < n; ofs += bs) {
                const std::size_t b = std::min(bs, n - ofs);
                xb.resize(static_cast<Eigen::Index>(b), in.x.cols());
                yb.resize(static_cast<Eigen::Index>(b));
                for (std::size_t i = 0; i < b; ++i) {
                    xb.row(static_cast<Eigen::Index>(i)) =
                        in.x.row(static_cast<Eigen::Index>(order[ofs + i]));
                    yb(static_cast<Eigen::Index>(i)) =
                        y(static_cast<Eigen::Index>(order[ofs + i]));
                }
                Gradients g = Gradients::zeros_like(m);
                batch_backprop(m, xb, yb, 1.0 / static_cast<double>(b), g);
                apply_update(m, g, spec.learning_rate);
            }
        }

        const double mse = full_loss(m, in, y);
        if (!std::isfinite(mse))
            throw DivergenceError("net '" + spec.name() + "': non-finite training loss at epoch " +
                                  std::to_string(epoch + 1) +
                                  " (learning rate too high?)");
        if (best - mse >= spec.early_stop_tol) {
            best = mse;
            stall = 0;
        } else if (spec.early_stop_patience > 0 && ++stall >= spec.early_stop_patience) {
            ++epoch;
            break;
        }
    }

    m.final_train_mse = full_loss(m, in, y);
    m.epochs_run = epoch;
    m.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return m;
}

Eigen::VectorXd predict_net(const NetModel& model, const FeatureTable& table) {
    if (table.column_names() != model.standardizer.input_columns()) {
        std::string missing, extra;
        for (const auto& c : model.standardizer.input_columns())
            if (table.column_index(c) < 0) missing += (missing.empty() ? "" : ",") + c;
        for (const auto& c : table.column_names()) {
            bool known = false;
            for (const auto& k : model.standardizer.input_columns())
                if (k == c) { known = true; break; }
            if (!known) extra += (extra.empty() ? "" : ",") + c;
        }
        if (missing.empty() && extra.empty())
            throw DataError("net predict: columns match but are ordered differently");
        throw DataError("net predict: column schema mismatch (missing: [" + missing +
                        "], extra: [" + extra + "])");
    }
    const NetInputs in = prepare_inputs(model, table);
    return model.spec.variant == NetVariant::recurrent ? forward_recurrent(model, in.x, in.ranges)
                                                       : forward_batch(model, in.x);
}

double gradient_check(const NetSpec& spec, const FeatureTable& table,
                      std::size_t n_params_sampled, double h) {
    NetModel m = init_net(spec, table);
    const NetInputs in = prepare_inputs(m, table);
    const Eigen::VectorXd& y = table.target();

    const std::vector<double> g = flatten(full_gradient(m, in, y));
    const std::size_t total = param_count(m);
    std::vector<std::size_t> sample;
    if (total <= n_params_sampled) {
        for (std::size_t i = 0; i < total; ++i) sample.push_back(i);
    } else {
        for (std::size_t k = 0; k < n_params_sampled; ++k)
            sample.push_back(k * total / n_params_sampled);
    }

    double worst = 0.0;
    for (std::size_t idx : sample) {
        double& p = param_ref(m, idx);
        const double saved = p;
        p = saved + h;
        const double up = full_loss(m, in, y);
        p = saved - h;
        const double down = full_loss(m, in, y);
        p = saved;
        const double fd = (up - down) / (2.0 * h);
        const double bp = g[idx];
        const double rel = std::abs(bp - fd) / std::max(1e-8, std::abs(bp) + std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

std::pair<double, std::vector<double>> net_loss_gradient(const NetModel& model,
                                                         const FeatureTable& table) {
    const NetInputs in = prepare_inputs(model, table);
    const double loss = full_loss(model, in, table.target());
    return {loss, flatten(full_gradient(model, in, table.target()))};
}

namespace {

constexpr const char* kNetMagic = "stormcast-net 1";

void write_matrix(std::ofstream& out, const char* tag, const Eigen::MatrixXd& m) {
    out << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out << (j ? " " : "") << format_double(m(i, j));
        out << '\n';
    }
}

double read_double(std::ifstream& in, const std::string& path) {
    std::string s;
    if (!(in >> s)) throw DataError(path + ": truncated model file");
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{}) throw DataError(path + ": bad number '" + s + "'");
    return v;
}

Eigen::MatrixXd read_matrix(std::ifstream& in, const char* tag, const std::string& path) {
    std::string word;
    Eigen::Index rows = 0, cols = 0;
    in >> word >> rows >> cols;
    if (word != tag) throw DataError(path + ": expected '" + tag + "' section");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_double(in, path);
    return m;
}

} // namespace

void NetModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << kNetMagic << '\n';
    out << "spec " << static_cast<int>(spec.variant) << ' ' << spec.n_hidden_layers << ' '
        << spec.neurons_per_layer << ' ' << format_double(spec.learning_rate) << ' '
        << spec.epochs << ' ' << spec.batch_size << ' ' << spec.seed << ' ' << spec.taps << ' '
        << format_double(spec.early_stop_tol) << ' ' << spec.early_stop_patience << ' '
        << spec.bptt_window << '\n';

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

    out << "layers " << weights.size() << '\n';
    for (std::size_t l = 0; l < weights.size(); ++l) {
        write_matrix(out, "W", weights[l]);
        out << "b " << biases[l].size() << '\n';
        for (Eigen::Index i = 0; i < biases[l].size(); ++i)
            out << (i ? " " : "") << format_double(biases[l](i));
        out << '\n';
    }
    write_matrix(out, "context", context_weights.size() > 0 ? context_weights
                                                            : Eigen::MatrixXd(0, 0));
    out << "metrics " << format_double(final_train_mse) << ' ' << format_double(train_seconds)
        << ' ' << epochs_run << '\n';
}

NetModel NetModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kNetMagic)
        throw DataError(path + ": not a stormcast net model (bad header)");

    NetModel m;
    std::string word;
    int variant = 0;
    in >> word >> variant >> m.spec.n_hidden_layers >> m.spec.neurons_per_layer;
    if (word != "spec") throw DataError(path + ": malformed model file");
    m.spec.learning_rate = read_double(in, path);
    in >> m.spec.epochs >> m.spec.batch_size >> m.spec.seed >> m.spec.taps;
    m.spec.early_stop_tol = read_double(in, path);
    in >> m.spec.early_stop_patience >> m.spec.bptt_window;
    m.spec.variant = static_cast<NetVariant>(variant);

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
    for (auto& v : mean) v = read_double(in, path);
    in >> word;
    if (word != "std_sd") throw DataError(path + ": malformed model file");
    std::vector<double> sd(n_kept);
    for (auto& v : sd) v = read_double(in, path);
    m.standardizer = Standardizer::restore(std::move(input_cols), std::move(kept),
                                           std::move(mean), std::move(sd));

    std::size_t n_layers = 0;
    in >> word >> n_layers;
    if (word != "layers") throw DataError(path + ": malformed model file");
    for (std::size_t l = 0; l < n_layers; ++l) {
        m.weights.push_back(read_matrix(in, "W", path));
        Eigen::Index bn = 0;
        in >> word >> bn;
        if (word != "b") throw DataError(path + ": malformed model file");
        Eigen::VectorXd b(bn);
        for (Eigen::Index i = 0; i < bn; ++i) b(i) = read_double(in, path);
        m.biases.push_back(std::move(b));
    }
    m.context_weights = read_matrix(in, "context", path);

    in >> word;
    if (word != "metrics") throw DataError(path + ": malformed model file");
    m.final_train_mse = read_double(in, path);
    m.train_seconds = read_double(in, path);
    in >> m.epochs_run;
    if (!in) throw DataError(path + ": truncated model file");
    return m;
}

} // namespace stormcast
