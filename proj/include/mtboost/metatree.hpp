#pragma once

#include <optional>
#include <vector>

#include "mtboost/common.hpp"
#include "mtboost/leaf_model.hpp"

namespace mtboost {

// Feature/threshold pair at an internal node. Continuous features carry a
// threshold and route left when x[feature] <= threshold (ties left); binary
// features carry none and route left when x[feature] == 0.
struct Split {
    int feature = -1;
    std::optional<double> threshold;

    bool operator==(const Split&) const = default;
};

struct MetaTreeNode {
    std::optional<Split> split;
    int left = -1;
    int right = -1;
    double g_prior = 0.0;  // prior probability this node is internal; 0 at leaves
    double g_post = 0.0;   // posterior, updated prequentially
    SufficientStats stats; // all fitted samples routed through this node
};

// A fixed representative-tree skeleton carrying, at every node, the
// conjugate leaf-model state over the samples routed through it and the
// posterior probability that the node is internal. Predictions and
// predictive densities mix over all subtrees of the skeleton exactly, via a
// single root-to-leaf recursion per query: at a path leaf the mixture
// density equals the node's posterior predictive; at an internal path node
// it is (1-g)*q_node + g*(child mixture), combined in log space. Fitting one
// point evaluates all densities at the pre-update state, accumulates the
// root mixture density into the running log marginal likelihood, rescales g
// by child/node mixture-density ratio, then pushes the target into every
// path node's stats.
//
// Fitting is sequential; a fitted tree is immutable through the const
// interface and safe to share across threads for prediction.
class MetaTree {
public:
    MetaTree() = default;
    MetaTree(std::vector<MetaTreeNode> nodes, FeatureSchema schema,
             NormalGammaParams prior);

    // Root-to-leaf node-id path for x. Rejects wrong arity, non-finite
    // continuous values and non-0/1 binary values.
    std::vector<int> route(std::span<const double> x) const;

    double predictive_log_density(std::span<const double> x, double y) const;
    double predict(std::span<const double> x) const;

    void fit_one(std::span<const double> x, double y);
    void fit(const Dataset& data);

    double log_marginal_likelihood() const { return log_ml_; }
    std::int64_t fitted_count() const { return nodes_.empty() ? 0 : nodes_[0].stats.n; }
    const std::vector<MetaTreeNode>& nodes() const { return nodes_; }
    const FeatureSchema& schema() const { return schema_; }
    const NormalGammaParams& prior() const { return prior_; }
    int depth() const;

    // Deserialization support: restore full state. Validates invariants.
    static MetaTree restore(std::vector<MetaTreeNode> nodes, FeatureSchema schema,
                            NormalGammaParams prior, double log_ml);

private:
    void validate() const;

    std::vector<MetaTreeNode> nodes_;  // nodes_[0] is the root
    FeatureSchema schema_;
    NormalGammaParams prior_;
    double log_ml_ = 0.0;
};

}  // namespace mtboost
