#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mtboost/metatree.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace mtboost;

namespace {

const NormalGammaParams kPrior{0.0, 2.0, 2.0, 2.0};

MetaTree leaf_only_tree(const FeatureSchema& schema) {
    return MetaTree({MetaTreeNode{}}, schema, kPrior);
}

// depth-1: split on binary feature `j`
MetaTree depth1_binary(int j, const FeatureSchema& schema, double g) {
    std::vector<MetaTreeNode> nodes(3);
    nodes[0].split = Split{j, std::nullopt};
    nodes[0].left = 1;
    nodes[0].right = 2;
    nodes[0].g_prior = nodes[0].g_post = g;
    return MetaTree(std::move(nodes), schema, kPrior);
}

// depth-2: root splits feature 0, left child splits feature 1
MetaTree fig1_shape(const FeatureSchema& schema, double g) {
    std::vector<MetaTreeNode> nodes(5);
    nodes[0].split = Split{0, std::nullopt};
    nodes[0].left = 1;
    nodes[0].right = 4;
    nodes[0].g_prior = nodes[0].g_post = g;
    nodes[1].split = Split{1, std::nullopt};
    nodes[1].left = 2;
    nodes[1].right = 3;
    nodes[1].g_prior = nodes[1].g_post = g;
    return MetaTree(std::move(nodes), schema, kPrior);
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("routing follows thresholds and binary values") {
    const FeatureSchema binary2{0, 2};
    CHECK(leaf_only_tree(binary2).route(std::vector<double>{1.0, 0.0}) ==
          std::vector<int>{0});

    const MetaTree d1 = depth1_binary(1, binary2, 0.6);
    CHECK(d1.route(std::vector<double>{0.0, 1.0}) == std::vector<int>{0, 2});
    CHECK(d1.route(std::vector<double>{1.0, 0.0}) == std::vector<int>{0, 1});

    // left at the root then right reaches the third node record (s_01)
    const MetaTree fig1 = fig1_shape(binary2, 0.6);
    CHECK(fig1.route(std::vector<double>{0.0, 1.0}) == std::vector<int>{0, 1, 3});

    // continuous: ties route left
    const FeatureSchema mixed{1, 0};
    std::vector<MetaTreeNode> nodes(3);
    nodes[0].split = Split{0, 0.25};
    nodes[0].left = 1;
    nodes[0].right = 2;
    nodes[0].g_prior = nodes[0].g_post = 0.5;
    const MetaTree cont(std::move(nodes), mixed, kPrior);
    CHECK(cont.route(std::vector<double>{0.25}) == std::vector<int>{0, 1});
    CHECK(cont.route(std::vector<double>{0.250001}) == std::vector<int>{0, 2});

    CHECK_THROWS_AS(cont.route(std::vector<double>{0.1, 0.2}), DataError);
    CHECK_THROWS_AS(d1.route(std::vector<double>{0.0, 0.5}), DataError);
    CHECK_THROWS_AS(cont.route(std::vector<double>{std::nan("")}), DataError);
}

TEST_CASE("meta-tree invariant validation") {
    const FeatureSchema schema{0, 2};
    // leaf with nonzero g rejected
    std::vector<MetaTreeNode> bad(1);
    bad[0].g_prior = 0.5;
    CHECK_THROWS_AS(MetaTree(std::move(bad), schema, kPrior), ConfigError);

    // threshold on a binary feature rejected
    std::vector<MetaTreeNode> bad2(3);
    bad2[0].split = Split{0, 0.5};
    bad2[0].left = 1;
    bad2[0].right = 2;
    CHECK_THROWS_AS(MetaTree(std::move(bad2), schema, kPrior), ConfigError);
}

TEST_CASE("density base cases: depth zero and collapsed mixture") {
    const FeatureSchema schema{0, 2};
    std::mt19937_64 rng(5);
    const Dataset data = testutil::random_dataset(rng, schema, 12);

    MetaTree leaf = leaf_only_tree(schema);
    leaf.fit(data);
    SufficientStats stats;
    for (double y : data.y) stats = update_stats(stats, y);
    const std::vector<double> x = testutil::random_point(rng, schema);
    CHECK(leaf.predictive_log_density(x, 0.4) ==
          doctest::Approx(predictive_log_density(posterior(kPrior, stats), 0.4))
              .epsilon(1e-14));

    // all g = 0: the mixture collapses to the root predictive exactly
    MetaTree collapsed = fig1_shape(schema, 0.0);
    collapsed.fit(data);
    CHECK(collapsed.predictive_log_density(x, -1.3) ==
          leaf.predictive_log_density(x, -1.3));
    CHECK(collapsed.predict(x) == leaf.predict(x));
    CHECK(collapsed.log_marginal_likelihood() ==
          doctest::Approx(leaf.log_marginal_likelihood()).epsilon(1e-14));
}

TEST_CASE("brute-force subtree oracle: density, mean, marginal, g_post") {
    std::mt19937_64 rng(2024);
    const FeatureSchema schemas[] = {{0, 3}, {2, 2}, {3, 0}};

    for (int rep = 0; rep < 12; ++rep) {
        const FeatureSchema schema = schemas[rep % 3];
        MetaTree tree =
            testutil::random_meta_tree(rng, schema, 3, kPrior, 0.8, 0.2, 0.8);
        const MetaTree reference = tree;  // unfitted copy for the oracle
        std::uniform_int_distribution<int> n_dist(5, 18);
        const Dataset data = testutil::random_dataset(rng, schema, n_dist(rng));
        tree.fit(data);

        const std::vector<double> x = testutil::random_point(rng, schema);
        const double y = 0.7;
        const oracle::SubtreeMixture mix =
            oracle::enumerate_subtrees(reference, data, x, y);

        CHECK(close_rel(tree.log_marginal_likelihood(), mix.log_marginal, 1e-9));
        CHECK(close_rel(tree.predictive_log_density(x, y), mix.log_mixture_density, 1e-9));
        CHECK(close_rel(tree.predict(x), mix.mixture_mean, 1e-9));
        for (std::size_t s = 0; s < tree.nodes().size(); ++s) {
            if (!tree.nodes()[s].split) continue;
            CHECK(close_rel(tree.nodes()[s].g_post,
                            mix.conditional_internal(static_cast<int>(s)), 1e-9));
        }
    }
}

TEST_CASE("fit_one: pre-update densities, fixed point, absorbing zero") {
    const FeatureSchema schema{0, 2};
    std::mt19937_64 rng(8);

    // logML increments by the pre-update predictive density
    MetaTree tree = fig1_shape(schema, 0.6);
    const Dataset data = testutil::random_dataset(rng, schema, 10);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double before = tree.log_marginal_likelihood();
        const double expected = tree.predictive_log_density(data.row(i), data.y[i]);
        tree.fit_one(data.row(i), data.y[i]);
        CHECK(tree.log_marginal_likelihood() - before ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK_THROWS_AS(tree.fit_one(std::vector<double>{0.0, 1.0}, std::nan("")),
                    std::invalid_argument);

    // unfitted tree: child and node predictives coincide, so g is a fixed point
    MetaTree fresh = fig1_shape(schema, 0.6);
    fresh.fit_one(std::vector<double>{0.0, 1.0}, 1.234);
    CHECK(fresh.nodes()[0].g_post == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(fresh.nodes()[1].g_post == doctest::Approx(0.6).epsilon(1e-14));

    // g = 0 is absorbing
    MetaTree zero = fig1_shape(schema, 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) zero.fit_one(data.row(i), data.y[i]);
    CHECK(zero.nodes()[0].g_post == 0.0);
    CHECK(zero.nodes()[1].g_post == 0.0);
}

TEST_CASE("fit folds fit_one over the data; empty fit is the identity") {
    const FeatureSchema schema{1, 1};
    std::mt19937_64 rng(21);
    const Dataset data = testutil::random_dataset(rng, schema, 17);

    MetaTree folded = testutil::random_meta_tree(rng, schema, 2, kPrior);
    MetaTree stepped = folded;
    folded.fit(data);
    for (std::size_t i = 0; i < data.n(); ++i) stepped.fit_one(data.row(i), data.y[i]);
    CHECK(folded.log_marginal_likelihood() == stepped.log_marginal_likelihood());
    for (std::size_t s = 0; s < folded.nodes().size(); ++s)
        CHECK(folded.nodes()[s].g_post == stepped.nodes()[s].g_post);

    MetaTree empty_fit = testutil::random_meta_tree(rng, schema, 2, kPrior);
    const MetaTree before = empty_fit;
    empty_fit.fit(Dataset{schema, {}, {}});
    CHECK(empty_fit.log_marginal_likelihood() == 0.0);
    for (std::size_t s = 0; s < empty_fit.nodes().size(); ++s)
        CHECK(empty_fit.nodes()[s].g_post == before.nodes()[s].g_post);
}

TEST_CASE("log marginal likelihood is permutation invariant") {
    const FeatureSchema schema{0, 2};
    std::mt19937_64 rng(31);
    const Dataset data = testutil::random_dataset(rng, schema, 30);

    MetaTree base = fig1_shape(schema, 0.6);
    base.fit(data);
    const double reference = base.log_marginal_likelihood();

    std::vector<std::size_t> order(data.n());
    std::iota(order.begin(), order.end(), 0);
    for (int rep = 0; rep < 20; ++rep) {
        std::shuffle(order.begin(), order.end(), rng);
        MetaTree tree = fig1_shape(schema, 0.6);
        for (std::size_t i : order) tree.fit_one(data.row(i), data.y[i]);
        CHECK(std::abs(tree.log_marginal_likelihood() - reference) < 1e-8);
    }
}

TEST_CASE("predict: prior mean, collapse, quadrature of the mixture density") {
    const FeatureSchema schema{0, 2};
    std::mt19937_64 rng(55);

    MetaTree unfitted = fig1_shape(schema, 0.6);
    for (int rep = 0; rep < 5; ++rep)
        CHECK(unfitted.predict(testutil::random_point(rng, schema)) == 0.0);

    MetaTree tree = fig1_shape(schema, 0.6);
    const Dataset data = testutil::random_dataset(rng, schema, 10);
    tree.fit(data);
    const std::vector<double> x = testutil::random_point(rng, schema);

    // the mixture can contain dof-4 components, so polynomial tails matter at
    // the 1e-6 level: integrate a dense core plus wide tail segments
    const auto integrate_wide = [&](const std::function<double(double)>& f) {
        return oracle::integrate(f, -60.0, 60.0, 400000) +
               oracle::integrate(f, -1500.0, -60.0, 150000) +
               oracle::integrate(f, 60.0, 1500.0, 150000);
    };
    const double mean_quad = integrate_wide(
        [&](double y) { return y * std::exp(tree.predictive_log_density(x, y)); });
    CHECK(tree.predict(x) == doctest::Approx(mean_quad).epsilon(1e-6));

    const double mass = integrate_wide(
        [&](double y) { return std::exp(tree.predictive_log_density(x, y)); });
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("mixture linearity: path weights sum to one and reproduce predict") {
    const FeatureSchema schema{2, 2};
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        MetaTree tree = testutil::random_meta_tree(rng, schema, 3, kPrior);
        const Dataset data = testutil::random_dataset(rng, schema, 25);
        tree.fit(data);

        const std::vector<double> x = testutil::random_point(rng, schema);
        const std::vector<int> path = tree.route(x);

        double weight_sum = 0.0, mixed = 0.0, upstream = 1.0;
        for (std::size_t i = 0; i < path.size(); ++i) {
            const MetaTreeNode& node = tree.nodes()[static_cast<std::size_t>(path[i])];
            const double here =
                i + 1 == path.size() ? upstream : upstream * (1.0 - node.g_post);
            weight_sum += here;
            mixed += here * predictive_mean(posterior(kPrior, node.stats));
            upstream *= node.g_post;
        }
        CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mixed == doctest::Approx(tree.predict(x)).epsilon(1e-12));
    }
}

TEST_CASE("root g_post tracks the generating tree") {
    const FeatureSchema schema{0, 2};

    // depth-0 truth: deep skeleton should shed its splits
    std::vector<double> shallow_g, deep_g;
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::uniform_int_distribution<int> bit(0, 1);

        MetaTree tree = fig1_shape(schema, 0.6);
        std::vector<double> x(2);
        for (int i = 0; i < 500; ++i) {
            x[0] = bit(rng);
            x[1] = bit(rng);
            tree.fit_one(x, noise(rng));
        }
        shallow_g.push_back(tree.nodes()[0].g_post);

        // full-depth truth with strong separation on the same skeleton
        MetaTree tree2 = fig1_shape(schema, 0.6);
        for (int i = 0; i < 500; ++i) {
            x[0] = bit(rng);
            x[1] = bit(rng);
            const double mean = (x[0] == 0.0 ? (x[1] == 0.0 ? -6.0 : -2.0) : 4.0);
            tree2.fit_one(x, mean + 0.3 * noise(rng));
        }
        deep_g.push_back(tree2.nodes()[0].g_post);
    }
    std::sort(shallow_g.begin(), shallow_g.end());
    std::sort(deep_g.begin(), deep_g.end());
    CHECK(shallow_g[10] < 0.1);  // median over 20 seeds
    CHECK(deep_g[10] > 0.9);
}
