#pragma once

#include <cstdint>
#include <vector>

namespace stxm {

struct ForestConfig {
    int n_trees = 500;
    int min_node_size = 5;   // nodes at or below this size become leaves
    int mtry = 0;            // features tried per split; 0 means floor(p/3), at least 1
    std::uint64_t seed = 0;  // per-tree streams derived from this
};

/// Binary regression tree stored as a flat node array. feature < 0 marks a
/// leaf; `value` then holds the training mean of the node.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const double* x) const {
        std::int32_t i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

/// Bagged ensemble of SSE-split regression trees with leaf-mean prediction.
struct ForestModel {
    std::vector<Tree> trees;
    std::size_t n_features = 0;
    ForestConfig config;
    double target_min = 0.0;  // hard prediction bounds (leaf means are convex)
    double target_max = 0.0;
    double oob_mse = 0.0;  // out-of-bag diagnostics from training
    double oob_r2 = 0.0;

    double predict(const double* x) const {
        double s = 0.0;
        for (const Tree& t : trees) s += t.predict(x);
        return s / static_cast<double>(trees.size());
    }
};

/// Trains on `rows` rows of `n_features` columns (row-major `features`).
/// Rows are canonicalized by content before any random draw, so training is
/// invariant to their order; per-tree randomness comes from streams derived
/// from config.seed, so results are reproducible for any thread count.
ForestModel train_forest(const std::vector<double>& features, std::size_t n_features,
                         const std::vector<double>& targets, const ForestConfig& config,
                         int threads = 1);

}  // namespace stxm
