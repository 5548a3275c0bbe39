#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stormcast/rng.hpp"

namespace stormcast {

/// One CART regression tree stored as a flat node array (root at index 0).
/// Interior nodes send x[feature] <= threshold to the left child; leaves
/// predict the mean training target that reached them.
class RegressionTree {
public:
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

    // Prediction for row i of a matrix, with one column's value overridden.
    // Used by permutation importance to avoid materializing permuted copies.
    double predict_with_override(const Eigen::MatrixXd& rows, Eigen::Index i, int column,
                                 double value) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    std::vector<Node>& nodes() { return nodes_; }

private:
    std::vector<Node> nodes_;
};

struct TreeParams {
    int mtry = 0;     // features sampled per split; 0 means all
    int min_leaf = 5; // minimum rows in each child
};

/// Grows a tree on the given row multiset by exhaustive SSE-minimizing
/// splits over mtry sampled features. Splits are placed at midpoints of
/// consecutive distinct values; SSE ties break toward the lowest feature
/// index, then the lowest threshold, so growth is deterministic given rng.
RegressionTree fit_tree(const Eigen::MatrixXd& rows, const Eigen::VectorXd& target,
                        const std::vector<std::size_t>& row_idx, const TreeParams& params,
                        Rng& rng);

} // namespace stormcast
