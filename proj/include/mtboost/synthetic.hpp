#pragma once

#include <random>
#include <string>
#include <vector>

#include "mtboost/cart.hpp"
#include "mtboost/common.hpp"
#include "mtboost/ensemble.hpp"

// True model trees over binary features and the Monte Carlo Bayes-risk
// harness: sample (tree, parameters), draw datasets, train each configured
// method, average test MSE over replicates.

namespace mtboost {

struct TrueLeafParams {
    double mu = 0.0;
    double tau = 1.0;
};

struct TrueModelTree {
    std::vector<RepNode> nodes;               // pre-order skeleton
    std::vector<TrueLeafParams> leaf_params;  // per node id; meaningful at leaves
    int num_features = 0;                     // all binary

    int route_leaf(std::span<const double> x) const;
    double mean_at(std::span<const double> x) const;
    double noise_variance_at(std::span<const double> x) const;
};

// Shape sampled by recursive coin flips: a node is internal with probability
// g_star until depth d_max_star where it must be a leaf. Internal nodes get a
// uniform-random feature; leaves draw tau ~ Gam(alpha, beta) and
// mu ~ N(m, 1/(kappa*tau)).
TrueModelTree sample_true_tree(std::mt19937_64& rng, int num_features, int d_max_star,
                               double g_star, const NormalGammaParams& prior);

// x uniform over {0,1}^K, y ~ N(mu_leaf, 1/tau_leaf).
Dataset sample_dataset(std::mt19937_64& rng, const TrueModelTree& tree, std::size_t n);

// Exact per-tree quantities, by enumeration over all 2^K inputs (K <= 20):
// expected squared error of the true-mean predictor, and E[y^2] (the risk of
// predicting zero).
double analytic_noise_floor(const TrueModelTree& tree);
double analytic_second_moment(const TrueModelTree& tree);

struct MethodSpec {
    enum class Kind { MetaTree, Baseline, Oracle, Zero };
    std::string name;
    Kind kind = Kind::MetaTree;
    TrainConfig train{};
    BaselineConfig baseline{};
};

struct RiskConfig {
    std::uint64_t seed = 1;
    int n_trees = 10;     // sampled true model trees
    int n_datasets = 2;   // datasets per true tree
    std::vector<int> n_train = {200, 400, 600, 800, 1000};
    int n_test = 250;
    int num_features = 10;
    int d_max_star = 3;
    double g_star = 0.9;
    NormalGammaParams true_prior{0.0, 2.0, 2.0, 2.0};
    std::vector<MethodSpec> methods;
    int threads = 1;
};

struct RiskRow {
    std::string method;
    int n = 0;
    int d_max = 0;
    int d_max_star = 0;
    double mean_mse = 0.0;
    double stderr_mse = 0.0;
    std::uint64_t seed = 0;
};

// One row per (method, training-set size), averaged over all
// (tree, dataset) replicates. Bit-for-bit reproducible for a given seed;
// replicates may run on a worker pool, aggregation order is fixed.
std::vector<RiskRow> approx_bayes_risk(const RiskConfig& config);

}  // namespace mtboost
