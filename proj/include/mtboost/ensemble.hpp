#pragma once

#include <span>
#include <vector>

#include "mtboost/cart.hpp"
#include "mtboost/common.hpp"
#include "mtboost/metatree.hpp"

namespace mtboost {

enum class WeightKind { Gbdt, Uniform, Posterior };

// Learning weights form F_{b-1} during construction; prediction weights form
// the final combination. Valid pairs: (gbdt, gbdt), (uniform, uniform),
// (uniform, posterior), (posterior, posterior).
struct WeightScheme {
    WeightKind learning = WeightKind::Uniform;
    WeightKind prediction = WeightKind::Uniform;

    static WeightScheme checked(WeightKind learning, WeightKind prediction);
    bool is_gbdt() const { return learning == WeightKind::Gbdt; }
    bool operator==(const WeightScheme&) const = default;
};

// Posterior over the feature assignments of the given trees under a uniform
// prior: softmax of the stored log marginal likelihoods, via log-sum-exp.
// Every tree must have been fitted on the same raw data in the same order.
std::vector<double> posterior_over_k(std::span<const MetaTree> trees);

struct TrainConfig {
    int num_trees = 100;  // B
    int d_max = 5;
    double g = 0.6;
    NormalGammaParams leaf_prior{};
    WeightScheme scheme{};
    double learning_rate = 1.0;
    int min_samples_leaf = 5;
    // Probability modes normally search structure on residuals but condition
    // the leaf posteriors on raw targets; this flag switches them to fit the
    // residuals themselves.
    bool fit_trees_on_residuals = false;
};

// Per-step bookkeeping, recorded so look-ahead can be asserted in tests.
struct TrainTrace {
    std::vector<int> learning_weight_counts;  // entry b-1 holds the count used at step b
};

class Ensemble {
public:
    // Algorithm: F_0 is mean(y) in gbdt mode and 0 otherwise; at each step
    // the residuals r_i = y_i - gamma * F_{b-1}(x_i) drive the structure
    // search, the resulting skeleton becomes a meta-tree which is fitted on
    // residuals (gbdt mode) or raw targets (probability modes), and the
    // learning weights over the already-built trees follow the scheme.
    static Ensemble train(const Dataset& data, const TrainConfig& config,
                          TrainTrace* trace = nullptr);

    double predict(std::span<const double> x) const;
    std::vector<double> predict_many(const Dataset& data) const;

    const std::vector<MetaTree>& trees() const { return trees_; }
    const std::vector<double>& prediction_weights() const { return prediction_weights_; }
    double f0() const { return f0_; }
    const TrainConfig& config() const { return config_; }
    const FeatureSchema& schema() const { return schema_; }

    static Ensemble restore(TrainConfig config, FeatureSchema schema,
                            std::vector<MetaTree> trees, std::vector<double> weights,
                            double f0);

private:
    Ensemble() = default;

    TrainConfig config_{};
    FeatureSchema schema_{};
    std::vector<MetaTree> trees_;
    std::vector<double> prediction_weights_;
    double f0_ = 0.0;
};

// Classical gradient boosting with point-estimate (mean-of-residual) leaves,
// reusing the same tree builder. The internal comparison baseline.
struct BaselineConfig {
    int num_trees = 100;
    int d_max = 5;
    double learning_rate = 0.1;
    int min_samples_leaf = 1;
};

struct PlainTree {
    RepTree rep;
    std::vector<double> leaf_values;  // indexed by node id; meaningful at leaves

    double predict(std::span<const double> x) const {
        return leaf_values[static_cast<std::size_t>(rep.route_leaf(x))];
    }
};

class GbdtBaseline {
public:
    static GbdtBaseline train(const Dataset& data, const BaselineConfig& config);

    double predict(std::span<const double> x) const;
    std::vector<double> predict_many(const Dataset& data) const;

    // Training sum of squared errors after each boosting step.
    const std::vector<double>& staged_train_sse() const { return staged_train_sse_; }
    double f0() const { return f0_; }
    const BaselineConfig& config() const { return config_; }
    const std::vector<PlainTree>& trees() const { return trees_; }
    const FeatureSchema& schema() const { return schema_; }

    static GbdtBaseline restore(BaselineConfig config, FeatureSchema schema,
                                std::vector<PlainTree> trees, double f0);

private:
    GbdtBaseline() = default;

    BaselineConfig config_{};
    FeatureSchema schema_{};
    std::vector<PlainTree> trees_;
    double f0_ = 0.0;
    std::vector<double> staged_train_sse_;
};

}  // namespace mtboost
