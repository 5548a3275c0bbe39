#include "stormcast/tree.hpp"

#include <algorithm>
#include <limits>

namespace stormcast {

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int n = 0;
    for (;;) {
        const Node& node = nodes_[static_cast<std::size_t>(n)];
        if (node.feature < 0) return node.value;
        n = x(node.feature) <= node.threshold ? node.left : node.right;
    }
}

double RegressionTree::predict_with_override(const Eigen::MatrixXd& rows, Eigen::Index i,
                                             int column, double value) const {
    int n = 0;
    for (;;) {
        const Node& node = nodes_[static_cast<std::size_t>(n)];
        if (node.feature < 0) return node.value;
        const double v = node.feature == column ? value : rows(i, node.feature);
        n = v <= node.threshold ? node.left : node.right;
    }
}

namespace {

struct Grower {
    const Eigen::MatrixXd& rows;
    const Eigen::VectorXd& target;
    const TreeParams& params;
    Rng& rng;
    std::vector<RegressionTree::Node>& nodes;

    // Reused across nodes to avoid reallocation.
    std::vector<std::pair<double, double>> scratch; // (feature value, target)

    int grow(std::vector<std::size_t>& idx) {
        const std::size_t n = idx.size();
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i : idx) {
            const double y = target(static_cast<Eigen::Index>(i));
            sum += y;
            sum_sq += y * y;
        }
        const double mean = sum / static_cast<double>(n);
        const double node_sse = std::max(0.0, sum_sq - sum * sum / static_cast<double>(n));

        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back({-1, 0.0, -1, -1, mean});

        if (n < 2 * static_cast<std::size_t>(params.min_leaf)) return node_id;

        bool pure = true;
        const double first = target(static_cast<Eigen::Index>(idx[0]));
        for (std::size_t i : idx)
            if (target(static_cast<Eigen::Index>(i)) != first) {
                pure = false;
                break;
            }
        if (pure) return node_id;

        const int d = static_cast<int>(rows.cols());
        int mtry = params.mtry;
        if (mtry <= 0 || mtry > d) mtry = d;
        auto candidates = rng.sample_without_replacement(static_cast<std::size_t>(d),
                                                         static_cast<std::size_t>(mtry));
        // Ascending feature order fixes the tie-break independent of the
        // sampling order.
        std::sort(candidates.begin(), candidates.end());

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_children_sse = std::numeric_limits<double>::infinity();

        for (std::size_t f : candidates) {
            scratch.clear();
            scratch.reserve(n);
            for (std::size_t i : idx)
                scratch.emplace_back(rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)),
                                     target(static_cast<Eigen::Index>(i)));
            std::sort(scratch.begin(), scratch.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t k = 1; k < n; ++k) {
                left_sum += scratch[k - 1].second;
                left_sq += scratch[k - 1].second * scratch[k - 1].second;
                if (k < static_cast<std::size_t>(params.min_leaf)) continue;
                if (n - k < static_cast<std::size_t>(params.min_leaf)) break;
                const double lo = scratch[k - 1].first;
                const double hi = scratch[k].first;
                if (!(lo < hi)) continue;

                const double right_sum = sum - left_sum;
                const double right_sq = sum_sq - left_sq;
                const double sse =
                    std::max(0.0, left_sq - left_sum * left_sum / static_cast<double>(k)) +
                    std::max(0.0, right_sq - right_sum * right_sum / static_cast<double>(n - k));
                if (sse < best_children_sse) {
                    best_children_sse = sse;
                    best_feature = static_cast<int>(f);
                    double mid = lo + 0.5 * (hi - lo);
                    if (!(mid < hi)) mid = lo; // adjacent doubles
                    best_threshold = mid;
                }
            }
        }

        if (best_feature < 0 || !(node_sse - best_children_sse > 0.0)) return node_id;

        std::vector<std::size_t> left_idx, right_idx;
        left_idx.reserve(n);
        right_idx.reserve(n);
        for (std::size_t i : idx) {
            if (rows(static_cast<Eigen::Index>(i), best_feature) <= best_threshold)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
        nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int left_id = grow(left_idx);
        nodes[static_cast<std::size_t>(node_id)].left = left_id;
        const int right_id = grow(right_idx);
        nodes[static_cast<std::size_t>(node_id)].right = right_id;
        return node_id;
    }
};

} // namespace

RegressionTree fit_tree(const Eigen::MatrixXd& rows, const Eigen::VectorXd& target,
                        const std::vector<std::size_t>& row_idx, const TreeParams& params,
                        Rng& rng) {
    RegressionTree tree;
    if (row_idx.empty()) {
        tree.nodes().push_back({-1, 0.0, -1, -1, 0.0});
        return tree;
    }
    Grower grower{rows, target, params, rng, tree.nodes(), {}};
    std::vector<std::size_t> idx = row_idx;
    grower.grow(idx);
    return tree;
}

} // namespace stormcast
