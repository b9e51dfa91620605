#include "mtboost/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "mtboost/kernels.hpp"
#include "mtboost/metrics.hpp"

namespace mtboost {

WeightScheme WeightScheme::checked(WeightKind learning, WeightKind prediction) {
    const bool ok = (learning == WeightKind::Gbdt && prediction == WeightKind::Gbdt) ||
                    (learning == WeightKind::Uniform &&
                     (prediction == WeightKind::Uniform ||
                      prediction == WeightKind::Posterior)) ||
                    (learning == WeightKind::Posterior &&
                     prediction == WeightKind::Posterior);
    if (!ok) throw ConfigError("invalid learning/prediction weight combination");
    return WeightScheme{learning, prediction};
}

std::vector<double> posterior_over_k(std::span<const MetaTree> trees) {
    if (trees.empty()) return {};
    std::vector<double> log_ml(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i) {
        if (trees[i].fitted_count() == 0)
            throw ConfigError("posterior_over_k: unfitted tree");
        log_ml[i] = trees[i].log_marginal_likelihood();
    }
    const double hi = kernels::reduce_max(log_ml);
    std::vector<double> w(trees.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(log_ml[i] - hi);
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

namespace {

void validate(const Dataset& data, const TrainConfig& config) {
    if (data.n() == 0) throw DataError("train: empty data");
    WeightScheme::checked(config.scheme.learning, config.scheme.prediction);
    if (config.num_trees < 0) throw ConfigError("train: B must be >= 0");
    if (!config.scheme.is_gbdt() && config.num_trees < 1)
        throw ConfigError("train: probability-weight schemes need B >= 1");
    if (config.d_max < 0) throw ConfigError("train: d_max must be >= 0");
    if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0))
        throw ConfigError("train: learning rate must be in (0, 1]");
    if (config.g < 0.0 || config.g > 1.0) throw ConfigError("train: g outside [0, 1]");
    NormalGammaParams::checked(config.leaf_prior.m, config.leaf_prior.kappa,
                               config.leaf_prior.alpha, config.leaf_prior.beta);
    if (config.scheme.is_gbdt() && config.fit_trees_on_residuals)
        throw ConfigError("train: fit_trees_on_residuals applies to probability modes");
}

}  // namespace

Ensemble Ensemble::train(const Dataset& data, const TrainConfig& config,
                         TrainTrace* trace) {
    validate(data, config);
    const std::size_t n = data.n();
    const bool gbdt = config.scheme.is_gbdt();

    Ensemble model;
    model.config_ = config;
    model.schema_ = data.schema;
    model.f0_ = gbdt ? kernels::reduce_sum(data.y) / static_cast<double>(n) : 0.0;

    Dataset work = data;  // y is overwritten with residuals each step
    std::vector<std::vector<double>> train_pred;
    std::vector<double> combined(n);

    for (int b = 1; b <= config.num_trees; ++b) {
        // F_{b-1} over trees 1..b-1 under the learning weights
        std::fill(combined.begin(), combined.end(), gbdt ? model.f0_ : 0.0);
        if (b > 1) {
            if (gbdt) {
                for (const std::vector<double>& p : train_pred)
                    kernels::axpy(1.0, p, combined);
            } else if (config.scheme.learning == WeightKind::Uniform) {
                const double w = 1.0 / static_cast<double>(b - 1);
                for (const std::vector<double>& p : train_pred)
                    kernels::axpy(w, p, combined);
            } else {
                const std::vector<double> w = posterior_over_k(model.trees_);
                for (std::size_t j = 0; j < train_pred.size(); ++j)
                    kernels::axpy(w[j], train_pred[j], combined);
            }
        }
        if (trace) trace->learning_weight_counts.push_back(b - 1);

        kernels::residual(data.y, combined, config.learning_rate, work.y);

        const RepTree rep = build_tree(work, config.d_max, config.min_samples_leaf);
        MetaTree tree = build_meta_tree(rep, config.g, config.leaf_prior);
        const bool fit_residuals = gbdt || config.fit_trees_on_residuals;
        tree.fit(fit_residuals ? work : data);

        std::vector<double> pred(n);
        for (std::size_t i = 0; i < n; ++i) pred[i] = tree.predict(data.row(i));
        train_pred.push_back(std::move(pred));
        model.trees_.push_back(std::move(tree));
    }

    const std::size_t count = model.trees_.size();
    if (gbdt) {
        model.prediction_weights_.assign(count, 1.0);
    } else if (config.scheme.prediction == WeightKind::Uniform) {
        model.prediction_weights_.assign(count, 1.0 / static_cast<double>(count));
    } else {
        model.prediction_weights_ = posterior_over_k(model.trees_);
    }
    return model;
}

double Ensemble::predict(std::span<const double> x) const {
    double out = config_.scheme.is_gbdt() ? f0_ : 0.0;
    for (std::size_t j = 0; j < trees_.size(); ++j)
        out += prediction_weights_[j] * trees_[j].predict(x);
    return out;
}

std::vector<double> Ensemble::predict_many(const Dataset& data) const {
    if (data.schema != schema_) throw DataError("predict: schema mismatch");
    std::vector<double> out(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) out[i] = predict(data.row(i));
    return out;
}

Ensemble Ensemble::restore(TrainConfig config, FeatureSchema schema,
                           std::vector<MetaTree> trees, std::vector<double> weights,
                           double f0) {
    WeightScheme::checked(config.scheme.learning, config.scheme.prediction);
    if (trees.size() != weights.size())
        throw DataError("ensemble restore: weight/tree count mismatch");
    Ensemble model;
    model.config_ = config;
    model.schema_ = schema;
    model.trees_ = std::move(trees);
    model.prediction_weights_ = std::move(weights);
    model.f0_ = f0;
    return model;
}

GbdtBaseline GbdtBaseline::train(const Dataset& data, const BaselineConfig& config) {
    if (data.n() == 0) throw DataError("train: empty data");
    if (config.num_trees < 0) throw ConfigError("train: B must be >= 0");
    if (config.d_max < 0) throw ConfigError("train: d_max must be >= 0");
    if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0))
        throw ConfigError("train: learning rate must be in (0, 1]");

    const std::size_t n = data.n();
    GbdtBaseline model;
    model.config_ = config;
    model.schema_ = data.schema;
    model.f0_ = kernels::reduce_sum(data.y) / static_cast<double>(n);

    std::vector<double> current(n, model.f0_);
    Dataset work = data;

    for (int b = 0; b < config.num_trees; ++b) {
        kernels::residual(data.y, current, 1.0, work.y);

        PlainTree tree;
        tree.rep = build_tree(work, config.d_max, config.min_samples_leaf);
        tree.leaf_values.assign(tree.rep.nodes.size(), 0.0);
        std::vector<std::int64_t> counts(tree.rep.nodes.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int leaf = tree.rep.route_leaf(data.row(i));
            tree.leaf_values[static_cast<std::size_t>(leaf)] += work.y[i];
            ++counts[static_cast<std::size_t>(leaf)];
        }
        for (std::size_t j = 0; j < counts.size(); ++j)
            if (counts[j] > 0) tree.leaf_values[j] /= static_cast<double>(counts[j]);

        for (std::size_t i = 0; i < n; ++i)
            current[i] += config.learning_rate * tree.predict(data.row(i));
        model.staged_train_sse_.push_back(sum_squared_error(data.y, current));
        model.trees_.push_back(std::move(tree));
    }
    return model;
}

double GbdtBaseline::predict(std::span<const double> x) const {
    double out = f0_;
    for (const PlainTree& tree : trees_) out += config_.learning_rate * tree.predict(x);
    return out;
}

std::vector<double> GbdtBaseline::predict_many(const Dataset& data) const {
    if (data.schema != schema_) throw DataError("predict: schema mismatch");
    std::vector<double> out(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) out[i] = predict(data.row(i));
    return out;
}

GbdtBaseline GbdtBaseline::restore(BaselineConfig config, FeatureSchema schema,
                                   std::vector<PlainTree> trees, double f0) {
    GbdtBaseline model;
    model.config_ = config;
    model.schema_ = schema;
    model.trees_ = std::move(trees);
    model.f0_ = f0;
    return model;
}

}  // namespace mtboost
