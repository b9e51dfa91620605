#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mtboost/common.hpp"
#include "mtboost/metatree.hpp"

// Greedy variance-minimizing tree construction on (x, target) rows, plus the
// conversion of a representative tree into an unfitted meta-tree.

namespace mtboost {

struct SplitCandidate {
    Split split;
    double impurity_reduction = 0.0;  // parent SSE minus child SSEs
    std::int64_t left_count = 0;
    std::int64_t right_count = 0;
};

struct RepNode {
    std::optional<Split> split;
    int left = -1;
    int right = -1;
};

struct RepTree {
    std::vector<RepNode> nodes;  // pre-order, nodes[0] is the root
    FeatureSchema schema;

    int route_leaf(std::span<const double> x) const;
};

// Candidate maximizing n*Var(all) - n_l*Var(left) - n_r*Var(right) over all
// features, with thresholds at midpoints of consecutive distinct sorted values
// (continuous) or the single 0/1 split (binary). Candidates must leave at
// least min_samples_leaf rows on each side. Returns nullopt when no candidate
// reduces impurity by more than 1e-12 (absolute). Deterministic: a candidate
// replaces the incumbent only when its reduction exceeds it by more than
// 1e-12, scanning features then thresholds in ascending order, so ties keep
// the lowest feature index and then the lowest threshold.
std::optional<SplitCandidate> best_split(const Dataset& data, std::span<const int> rows,
                                         int min_samples_leaf);
std::optional<SplitCandidate> best_split(const Dataset& data, int min_samples_leaf);

// Recursive best_split application. A node becomes a leaf at depth d_max,
// when fewer than 2*min_samples_leaf rows remain, or when no admissible
// candidate exists. The result is binary and regular.
RepTree build_tree(const Dataset& data, int d_max, int min_samples_leaf);

// Unfitted meta-tree over the skeleton: g_prior = g_post = g at internal
// nodes and 0 at leaves, empty stats, prior leaf-model parameters everywhere.
MetaTree build_meta_tree(const RepTree& rep, double g, const NormalGammaParams& prior);

}  // namespace mtboost
