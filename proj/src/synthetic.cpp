#include "mtboost/synthetic.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "mtboost/metrics.hpp"

namespace mtboost {

int TrueModelTree::route_leaf(std::span<const double> x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].split) {
        const RepNode& rn = nodes[static_cast<std::size_t>(node)];
        const double v = x[static_cast<std::size_t>(rn.split->feature)];
        node = v == 0.0 ? rn.left : rn.right;
    }
    return node;
}

double TrueModelTree::mean_at(std::span<const double> x) const {
    return leaf_params[static_cast<std::size_t>(route_leaf(x))].mu;
}

double TrueModelTree::noise_variance_at(std::span<const double> x) const {
    return 1.0 / leaf_params[static_cast<std::size_t>(route_leaf(x))].tau;
}

namespace {

void sample_node(std::mt19937_64& rng, int depth, int d_max_star, double g_star,
                 int num_features, const NormalGammaParams& prior, TrueModelTree& tree) {
    const std::size_t self = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.leaf_params.emplace_back();

    bool internal = false;
    if (depth < d_max_star) {
        std::bernoulli_distribution coin(g_star);
        internal = coin(rng);
    }
    if (internal) {
        std::uniform_int_distribution<int> pick(0, num_features - 1);
        tree.nodes[self].split = Split{pick(rng), std::nullopt};
        tree.nodes[self].left = static_cast<int>(tree.nodes.size());
        sample_node(rng, depth + 1, d_max_star, g_star, num_features, prior, tree);
        tree.nodes[self].right = static_cast<int>(tree.nodes.size());
        sample_node(rng, depth + 1, d_max_star, g_star, num_features, prior, tree);
    } else {
        std::gamma_distribution<double> gamma(prior.alpha, 1.0 / prior.beta);
        const double tau = gamma(rng);
        std::normal_distribution<double> normal(prior.m, 1.0 / std::sqrt(prior.kappa * tau));
        tree.leaf_params[self] = TrueLeafParams{normal(rng), tau};
    }
}

}  // namespace

TrueModelTree sample_true_tree(std::mt19937_64& rng, int num_features, int d_max_star,
                               double g_star, const NormalGammaParams& prior) {
    if (num_features < 1) throw ConfigError("sample_true_tree: need at least one feature");
    if (d_max_star < 0) throw ConfigError("sample_true_tree: negative depth");
    if (g_star < 0.0 || g_star > 1.0)
        throw ConfigError("sample_true_tree: g_star outside [0, 1]");
    NormalGammaParams::checked(prior.m, prior.kappa, prior.alpha, prior.beta);

    TrueModelTree tree;
    tree.num_features = num_features;
    sample_node(rng, 0, d_max_star, g_star, num_features, prior, tree);
    return tree;
}

Dataset sample_dataset(std::mt19937_64& rng, const TrueModelTree& tree, std::size_t n) {
    if (n < 1) throw ConfigError("sample_dataset: n must be >= 1");
    Dataset data;
    data.schema = FeatureSchema{0, tree.num_features};
    data.x.reserve(n * static_cast<std::size_t>(tree.num_features));
    data.y.reserve(n);

    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<double> x(static_cast<std::size_t>(tree.num_features));
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : x) v = static_cast<double>(bit(rng));
        const std::size_t leaf = static_cast<std::size_t>(tree.route_leaf(x));
        const TrueLeafParams& p = tree.leaf_params[leaf];
        std::normal_distribution<double> noise(p.mu, 1.0 / std::sqrt(p.tau));
        data.add_row(x, noise(rng));
    }
    return data;
}

namespace {

// Exact reach probabilities by enumerating every binary input.
template <typename PerLeaf>
double enumerate_inputs(const TrueModelTree& tree, PerLeaf value) {
    const int k = tree.num_features;
    if (k > 20) throw ConfigError("analytic enumeration limited to K <= 20");
    const std::uint32_t count = 1u << k;
    std::vector<double> x(static_cast<std::size_t>(k));
    double acc = 0.0;
    for (std::uint32_t bits = 0; bits < count; ++bits) {
        for (int j = 0; j < k; ++j)
            x[static_cast<std::size_t>(j)] = static_cast<double>((bits >> j) & 1u);
        acc += value(tree.leaf_params[static_cast<std::size_t>(tree.route_leaf(x))]);
    }
    return acc / static_cast<double>(count);
}

}  // namespace

double analytic_noise_floor(const TrueModelTree& tree) {
    return enumerate_inputs(tree, [](const TrueLeafParams& p) { return 1.0 / p.tau; });
}

double analytic_second_moment(const TrueModelTree& tree) {
    return enumerate_inputs(
        tree, [](const TrueLeafParams& p) { return p.mu * p.mu + 1.0 / p.tau; });
}

namespace {

std::vector<double> method_test_predictions(const MethodSpec& method,
                                            const Dataset& train, const Dataset& test,
                                            const TrueModelTree& truth) {
    switch (method.kind) {
        case MethodSpec::Kind::MetaTree: {
            const Ensemble model = Ensemble::train(train, method.train);
            return model.predict_many(test);
        }
        case MethodSpec::Kind::Baseline: {
            const GbdtBaseline model = GbdtBaseline::train(train, method.baseline);
            return model.predict_many(test);
        }
        case MethodSpec::Kind::Oracle: {
            std::vector<double> out(test.n());
            for (std::size_t i = 0; i < test.n(); ++i) out[i] = truth.mean_at(test.row(i));
            return out;
        }
        case MethodSpec::Kind::Zero:
            return std::vector<double>(test.n(), 0.0);
    }
    throw ConfigError("unknown method kind");
}

}  // namespace

std::vector<RiskRow> approx_bayes_risk(const RiskConfig& config) {
    if (config.n_trees < 1 || config.n_datasets < 1 || config.n_test < 1)
        throw ConfigError("approx_bayes_risk: counts must be >= 1");
    for (int n : config.n_train)
        if (n < 1) throw ConfigError("approx_bayes_risk: n_train must be >= 1");
    if (config.methods.empty()) throw ConfigError("approx_bayes_risk: no methods");

    const int n_max = *std::max_element(config.n_train.begin(), config.n_train.end());

    // True trees are drawn up front so replicate tasks are independent.
    std::vector<TrueModelTree> trees;
    trees.reserve(static_cast<std::size_t>(config.n_trees));
    for (int t = 0; t < config.n_trees; ++t) {
        std::mt19937_64 rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(t)}));
        trees.push_back(sample_true_tree(rng, config.num_features, config.d_max_star,
                                         config.g_star, config.true_prior));
    }

    const std::size_t replicates =
        static_cast<std::size_t>(config.n_trees) * static_cast<std::size_t>(config.n_datasets);
    // mse[replicate][method][n_index]
    std::vector<std::vector<std::vector<double>>> mse(
        replicates, std::vector<std::vector<double>>(
                        config.methods.size(), std::vector<double>(config.n_train.size())));

    auto run_replicate = [&](std::size_t rep) {
        const int t = static_cast<int>(rep) / config.n_datasets;
        const int d = static_cast<int>(rep) % config.n_datasets;
        std::mt19937_64 rng(derive_seed(
            config.seed, {2, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(d)}));
        const TrueModelTree& truth = trees[static_cast<std::size_t>(t)];
        const Dataset train_full =
            sample_dataset(rng, truth, static_cast<std::size_t>(n_max));
        const Dataset test = sample_dataset(rng, truth, static_cast<std::size_t>(config.n_test));

        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            for (std::size_t ni = 0; ni < config.n_train.size(); ++ni) {
                const Dataset train =
                    train_full.head(static_cast<std::size_t>(config.n_train[ni]));
                const std::vector<double> pred =
                    method_test_predictions(config.methods[m], train, test, truth);
                mse[rep][m][ni] = mean_squared_error(test.y, pred);
            }
        }
    };

    const int workers = std::max(1, config.threads);
    if (workers == 1) {
        for (std::size_t rep = 0; rep < replicates; ++rep) run_replicate(rep);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t rep = next.fetch_add(1); rep < replicates;
                     rep = next.fetch_add(1))
                    run_replicate(rep);
            });
        for (std::thread& th : pool) th.join();
    }

    // Deterministic ordered reduction: methods in configuration order, then n.
    std::vector<RiskRow> rows;
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
        for (std::size_t ni = 0; ni < config.n_train.size(); ++ni) {
            double sum = 0.0;
            for (std::size_t rep = 0; rep < replicates; ++rep) sum += mse[rep][m][ni];
            const double mean = sum / static_cast<double>(replicates);
            double var = 0.0;
            for (std::size_t rep = 0; rep < replicates; ++rep) {
                const double d = mse[rep][m][ni] - mean;
                var += d * d;
            }
            const double stderr_mse =
                replicates > 1 ? std::sqrt(var / static_cast<double>(replicates - 1) /
                                           static_cast<double>(replicates))
                               : 0.0;
            const MethodSpec& method = config.methods[m];
            const int d_max = method.kind == MethodSpec::Kind::Baseline
                                  ? method.baseline.d_max
                                  : method.train.d_max;
            rows.push_back(RiskRow{method.name, config.n_train[ni], d_max,
                                   config.d_max_star, mean, stderr_mse, config.seed});
        }
    }
    return rows;
}

}  // namespace mtboost
