#include "forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "errors.hpp"
#include "rng.hpp"
#include "threading.hpp"

namespace stxm {

namespace {

struct Builder {
    const std::vector<double>& features;  // canonical order, row-major
    const std::vector<double>& targets;
    std::size_t p;
    int min_node_size;
    int mtry;
    Rng& rng;
    Tree& tree;

    std::vector<std::uint32_t> rows;      // bootstrap row indices, partitioned in place
    std::vector<std::uint32_t> scratch;   // feature candidates
    std::vector<std::uint32_t> order;     // sort buffer

    double feature_at(std::uint32_t row, std::size_t f) const {
        return features[row * p + f];
    }

    // Builds the subtree over rows[lo, hi) and returns its node index.
    std::int32_t build(std::size_t lo, std::size_t hi) {
        const std::size_t n = hi - lo;
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) sum += targets[rows[i]];
        const double mean = sum / static_cast<double>(n);

        const std::int32_t self = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.back().value = mean;
        if (n <= static_cast<std::size_t>(min_node_size)) return self;

        // Random feature subset, drawn without replacement.
        scratch.resize(p);
        std::iota(scratch.begin(), scratch.end(), 0u);
        for (int k = 0; k < mtry; ++k) {
            const std::size_t j =
                static_cast<std::size_t>(k) +
                static_cast<std::size_t>(rng.uniform_index(p - static_cast<std::size_t>(k)));
            std::swap(scratch[static_cast<std::size_t>(k)], scratch[j]);
        }

        // Best SSE-reducing split: maximize sum_L^2/n_L + sum_R^2/n_R over
        // midpoints between consecutive distinct feature values.
        double best_gain = -1.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        order.assign(rows.begin() + static_cast<long>(lo), rows.begin() + static_cast<long>(hi));
        for (int k = 0; k < mtry; ++k) {
            const std::size_t f = scratch[static_cast<std::size_t>(k)];
            std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
                const double fa = feature_at(a, f), fb = feature_at(b, f);
                if (fa != fb) return fa < fb;
                return a < b;
            });
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += targets[order[i]];
                const double x0 = feature_at(order[i], f);
                const double x1 = feature_at(order[i + 1], f);
                if (x1 <= x0) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(n - i - 1);
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = x0 + 0.5 * (x1 - x0);
                }
            }
        }
        if (best_gain < 0.0) return self;  // every candidate feature constant

        // Partition rows around the threshold (stable by canonical index).
        std::vector<std::uint32_t> left, right;
        left.reserve(n);
        right.reserve(n);
        for (std::size_t i = lo; i < hi; ++i) {
            if (feature_at(rows[i], best_feature) <= best_threshold)
                left.push_back(rows[i]);
            else
                right.push_back(rows[i]);
        }
        std::copy(left.begin(), left.end(), rows.begin() + static_cast<long>(lo));
        std::copy(right.begin(), right.end(), rows.begin() + static_cast<long>(lo + left.size()));

        tree.nodes[static_cast<std::size_t>(self)].feature =
            static_cast<std::int32_t>(best_feature);
        tree.nodes[static_cast<std::size_t>(self)].threshold = best_threshold;
        const std::int32_t l = build(lo, lo + left.size());
        tree.nodes[static_cast<std::size_t>(self)].left = l;
        const std::int32_t r = build(lo + left.size(), hi);
        tree.nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }
};

}  // namespace

ForestModel train_forest(const std::vector<double>& features, std::size_t n_features,
                         const std::vector<double>& targets, const ForestConfig& config,
                         int threads) {
    if (n_features == 0 || targets.empty() || features.size() != targets.size() * n_features)
        throw argument_error("training set dimensions are inconsistent");
    const std::size_t S = targets.size();

    // Canonical row order: lexicographic over (features, target). Training
    // is then invariant to how the caller happened to order the rows.
    std::vector<std::uint32_t> canon(S);
    std::iota(canon.begin(), canon.end(), 0u);
    std::sort(canon.begin(), canon.end(), [&](std::uint32_t a, std::uint32_t b) {
        for (std::size_t f = 0; f < n_features; ++f) {
            const double fa = features[a * n_features + f], fb = features[b * n_features + f];
            if (fa != fb) return fa < fb;
        }
        return targets[a] < targets[b];
    });
    std::vector<double> feat(S * n_features);
    std::vector<double> targ(S);
    for (std::size_t i = 0; i < S; ++i) {
        targ[i] = targets[canon[i]];
        std::copy(features.begin() + canon[i] * n_features,
                  features.begin() + (canon[i] + 1) * n_features,
                  feat.begin() + i * n_features);
    }

    ForestModel model;
    model.n_features = n_features;
    model.config = config;
    if (model.config.mtry <= 0)
        model.config.mtry = std::max(1, static_cast<int>(n_features / 3));
    model.config.mtry = std::min(model.config.mtry, static_cast<int>(n_features));
    model.target_min = *std::min_element(targ.begin(), targ.end());
    model.target_max = *std::max_element(targ.begin(), targ.end());
    if (model.target_min == model.target_max)
        std::fprintf(stderr, "[stxm] forest target is constant; trees are single leaves\n");

    const std::size_t n_trees = static_cast<std::size_t>(std::max(1, config.n_trees));
    model.trees.resize(n_trees);
    std::vector<std::vector<std::uint32_t>> in_bag(n_trees);

    parallel_for(n_trees, threads, [&](std::size_t t) {
        Rng rng(derive_seed(config.seed, t));
        std::vector<std::uint32_t> bag_count(S, 0);
        Builder b{feat, targ, n_features, model.config.min_node_size, model.config.mtry, rng,
                  model.trees[t],       {},   {},   {}};
        b.rows.resize(S);
        for (std::size_t i = 0; i < S; ++i) {
            const std::uint32_t r = static_cast<std::uint32_t>(rng.uniform_index(S));
            b.rows[i] = r;
            ++bag_count[r];
        }
        b.tree.nodes.reserve(2 * S / static_cast<std::size_t>(model.config.min_node_size) + 4);
        b.build(0, S);
        in_bag[t] = std::move(bag_count);
    });

    // Out-of-bag diagnostics.
    double sse = 0.0, n_oob = 0.0, tsum = 0.0, tsq = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        double pred = 0.0;
        std::size_t cnt = 0;
        for (std::size_t t = 0; t < n_trees; ++t) {
            if (in_bag[t][i] != 0) continue;
            pred += model.trees[t].predict(feat.data() + i * n_features);
            ++cnt;
        }
        tsum += targ[i];
        tsq += targ[i] * targ[i];
        if (cnt == 0) continue;
        pred /= static_cast<double>(cnt);
        sse += (pred - targ[i]) * (pred - targ[i]);
        n_oob += 1.0;
    }
    if (n_oob > 0.0) {
        model.oob_mse = sse / n_oob;
        const double var = tsq / static_cast<double>(S) -
                           (tsum / static_cast<double>(S)) * (tsum / static_cast<double>(S));
        model.oob_r2 = var > 0.0 ? 1.0 - model.oob_mse / var : 0.0;
    }
    return model;
}

}  // namespace stxm
