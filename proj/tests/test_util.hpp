#pragma once

// Shared helpers for randomized tests: skeleton/meta-tree generators and
// structured random datasets.

#include <random>

#include "mtboost/cart.hpp"
#include "mtboost/metatree.hpp"

namespace mtboost::testutil {

inline void random_skeleton_node(std::mt19937_64& rng, const FeatureSchema& schema,
                                 int depth, int max_depth, double p_internal,
                                 std::vector<MetaTreeNode>& nodes, double g_lo,
                                 double g_hi) {
    const std::size_t self = nodes.size();
    nodes.emplace_back();

    std::bernoulli_distribution split_coin(p_internal);
    if (depth < max_depth && split_coin(rng)) {
        std::uniform_int_distribution<int> feature(0, schema.total() - 1);
        Split s;
        s.feature = feature(rng);
        if (!schema.is_binary(s.feature)) {
            std::uniform_real_distribution<double> threshold(-0.8, 0.8);
            s.threshold = threshold(rng);
        }
        std::uniform_real_distribution<double> g_dist(g_lo, g_hi);
        nodes[self].split = s;
        nodes[self].g_prior = nodes[self].g_post = g_dist(rng);
        nodes[self].left = static_cast<int>(nodes.size());
        random_skeleton_node(rng, schema, depth + 1, max_depth, p_internal, nodes, g_lo,
                             g_hi);
        nodes[self].right = static_cast<int>(nodes.size());
        random_skeleton_node(rng, schema, depth + 1, max_depth, p_internal, nodes, g_lo,
                             g_hi);
    }
}

// Random ragged skeleton of depth <= max_depth with random per-node g.
inline MetaTree random_meta_tree(std::mt19937_64& rng, const FeatureSchema& schema,
                                 int max_depth, const NormalGammaParams& prior,
                                 double p_internal = 0.75, double g_lo = 0.15,
                                 double g_hi = 0.85) {
    std::vector<MetaTreeNode> nodes;
    random_skeleton_node(rng, schema, 0, max_depth, p_internal, nodes, g_lo, g_hi);
    return MetaTree(std::move(nodes), schema, prior);
}

// Features uniform; targets carry a step signal on one random feature plus
// unit noise, so subtree posteriors actually move.
inline Dataset random_dataset(std::mt19937_64& rng, const FeatureSchema& schema,
                              std::size_t n) {
    Dataset data;
    data.schema = schema;
    std::uniform_real_distribution<double> cont(-1.0, 1.0);
    std::uniform_int_distribution<int> bit(0, 1);
    std::uniform_int_distribution<int> pick(0, schema.total() - 1);
    std::normal_distribution<double> noise(0.0, 1.0);

    const int signal_feature = pick(rng);
    std::vector<double> x(static_cast<std::size_t>(schema.total()));
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < schema.total(); ++j)
            x[static_cast<std::size_t>(j)] = schema.is_binary(j)
                                                 ? static_cast<double>(bit(rng))
                                                 : cont(rng);
        const double v = x[static_cast<std::size_t>(signal_feature)];
        const double step = (schema.is_binary(signal_feature) ? v == 1.0 : v > 0.0) ? 2.0
                                                                                    : -2.0;
        data.add_row(x, step + noise(rng));
    }
    return data;
}

inline std::vector<double> random_point(std::mt19937_64& rng, const FeatureSchema& schema) {
    std::uniform_real_distribution<double> cont(-1.0, 1.0);
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<double> x(static_cast<std::size_t>(schema.total()));
    for (int j = 0; j < schema.total(); ++j)
        x[static_cast<std::size_t>(j)] =
            schema.is_binary(j) ? static_cast<double>(bit(rng)) : cont(rng);
    return x;
}

}  // namespace mtboost::testutil
