#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mtboost/leaf_model.hpp"
#include "oracle.hpp"

using namespace mtboost;

namespace {

SufficientStats stats_of(const std::vector<double>& values) {
    SufficientStats s;
    for (double v : values) s = update_stats(s, v);
    return s;
}

}  // namespace

TEST_CASE("update_stats accumulates and rejects non-finite targets") {
    SufficientStats s;
    s = update_stats(s, 2.0);
    CHECK(s.n == 1);
    CHECK(s.sum_y == 2.0);
    CHECK(s.sum_y_sq == 4.0);
    s = update_stats(s, 2.0);
    CHECK(s.n == 2);
    CHECK(s.sum_y == 4.0);
    CHECK(s.sum_y_sq == 8.0);
    CHECK_THROWS_AS(update_stats(s, std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(update_stats(s, INFINITY), std::invalid_argument);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(NormalGammaParams::checked(0, 0, 1, 1), ConfigError);
    CHECK_THROWS_AS(NormalGammaParams::checked(0, 1, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(NormalGammaParams::checked(0, 1, 1, -1), ConfigError);
    CHECK_NOTHROW(NormalGammaParams::checked(0, 1, 0.51, 1));
}

TEST_CASE("posterior: no-data identity and closed-form point") {
    const NormalGammaParams prior{0, 1, 1, 1};
    CHECK(posterior(prior, SufficientStats{}) == prior);

    const NormalGammaParams post = posterior(prior, SufficientStats{1, 0.0, 0.0});
    CHECK(post.m == 0.0);
    CHECK(post.kappa == 2.0);
    CHECK(post.alpha == 1.5);
    CHECK(post.beta == 1.0);
}

TEST_CASE("posterior parameters match quadrature moments") {
    // E[mu | data] = m_n, E[tau | data] = alpha_n / beta_n,
    // Var(mu | data) = beta_n / (kappa_n (alpha_n - 1)).
    const NormalGammaParams prior{0, 1, 1, 1};
    const std::vector<double> values = {1.0};
    const NormalGammaParams post = posterior(prior, stats_of(values));
    CHECK(post.alpha == 1.5);

    const oracle::PosteriorMoments m = oracle::posterior_moments_quadrature(prior, values);
    CHECK(m.mean_mu == doctest::Approx(post.m).epsilon(1e-6));
    CHECK(m.mean_tau == doctest::Approx(post.alpha / post.beta).epsilon(1e-6));
    CHECK(m.var_mu ==
          doctest::Approx(post.beta / (post.kappa * (post.alpha - 1.0))).epsilon(1e-5));

    const NormalGammaParams prior2{0.5, 2, 2, 2};
    const std::vector<double> values2 = {1.0, -0.3, 0.8, 2.2};
    const NormalGammaParams post2 = posterior(prior2, stats_of(values2));
    const oracle::PosteriorMoments m2 =
        oracle::posterior_moments_quadrature(prior2, values2);
    CHECK(m2.mean_mu == doctest::Approx(post2.m).epsilon(1e-6));
    CHECK(m2.mean_tau == doctest::Approx(post2.alpha / post2.beta).epsilon(1e-6));
}

TEST_CASE("posterior mean lands within three posterior sds of the truth") {
    const NormalGammaParams prior{0, 2, 2, 2};
    const double true_mu = 0.7, true_tau = 2.0;
    std::mt19937_64 rng(42);
    std::normal_distribution<double> noise(true_mu, 1.0 / std::sqrt(true_tau));
    SufficientStats stats;
    for (int i = 0; i < 1000; ++i) stats = update_stats(stats, noise(rng));

    const NormalGammaParams post = posterior(prior, stats);
    const double post_sd = std::sqrt(post.beta / (post.kappa * (post.alpha - 1.0)));
    CHECK(std::abs(post.m - true_mu) < 3.0 * post_sd);
}

TEST_CASE("predictive density: symmetry, quadrature agreement, normalization") {
    const NormalGammaParams sym{0, 1, 1, 1};
    for (double y : {0.3, 1.7, 4.2})
        CHECK(predictive_log_density(sym, y) ==
              doctest::Approx(predictive_log_density(sym, -y)).epsilon(1e-15));
    CHECK_THROWS_AS(predictive_log_density(sym, std::nan("")), std::invalid_argument);

    // fixed analytic point: posterior (0,2,1.5,1) has a standard t_3 predictive
    const NormalGammaParams post{0, 2, 1.5, 1};
    CHECK(std::exp(predictive_log_density(post, 0.0)) ==
          doctest::Approx(2.0 / (M_PI * std::sqrt(3.0))).epsilon(1e-12));
    CHECK(std::exp(predictive_log_density(post, 0.0)) ==
          doctest::Approx(oracle::predictive_density_quadrature(post, 0.0)).epsilon(1e-6));

    for (double y : {-2.0, -0.5, 0.9, 3.0})
        CHECK(std::exp(predictive_log_density(post, y)) ==
              doctest::Approx(oracle::predictive_density_quadrature(post, y))
                  .epsilon(1e-6));

    // normalization over m +- 50 sigma
    const NormalGammaParams wide{1.3, 2, 2, 5};
    const double scale =
        std::sqrt(wide.beta * (wide.kappa + 1.0) / (wide.alpha * wide.kappa));
    const double mass = oracle::integrate(
        [&](double y) { return std::exp(predictive_log_density(wide, y)); },
        wide.m - 50.0 * scale, wide.m + 50.0 * scale, 200000);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("predictive mean is the location and matches quadrature") {
    CHECK(predictive_mean(NormalGammaParams{0, 1, 1, 1}) == 0.0);
    CHECK(predictive_mean(NormalGammaParams{3.7, 2, 2, 5}) == 3.7);

    const NormalGammaParams post =
        posterior(NormalGammaParams{0, 1, 2, 2}, SufficientStats{4, 8.0, 20.0});
    CHECK(predictive_mean(post) == doctest::Approx(1.6).epsilon(1e-15));

    const double scale =
        std::sqrt(post.beta * (post.kappa + 1.0) / (post.alpha * post.kappa));
    const double mean_quad = oracle::integrate(
        [&](double y) { return y * std::exp(predictive_log_density(post, y)); },
        post.m - 60.0 * scale, post.m + 60.0 * scale, 200000);
    CHECK(mean_quad == doctest::Approx(predictive_mean(post)).epsilon(1e-6));
}

TEST_CASE("batch update equals chained one-point updates") {
    const NormalGammaParams prior{0.4, 1.5, 2.5, 1.2};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(1.0, 2.0);

    std::vector<double> values(40);
    for (double& v : values) v = noise(rng);

    SufficientStats batch = stats_of(values);
    const NormalGammaParams direct = posterior(prior, batch);

    // chained: posterior after i points equals posterior(prior, stats_i); the
    // check is that incremental stats produce identical parameters at the end
    SufficientStats incremental;
    NormalGammaParams chained = prior;
    for (double v : values) {
        incremental = update_stats(incremental, v);
        chained = posterior(prior, incremental);
    }
    CHECK(chained.m == doctest::Approx(direct.m).epsilon(1e-12));
    CHECK(chained.kappa == doctest::Approx(direct.kappa).epsilon(1e-12));
    CHECK(chained.alpha == doctest::Approx(direct.alpha).epsilon(1e-12));
    CHECK(chained.beta == doctest::Approx(direct.beta).epsilon(1e-12));
}

TEST_CASE("prequential chain rule is permutation invariant") {
    const NormalGammaParams prior{0, 2, 2, 2};
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.5, 1.5);
    std::vector<double> values(25);
    for (double& v : values) v = noise(rng);

    const auto chain_log_density = [&](const std::vector<double>& ys) {
        SufficientStats stats;
        double total = 0.0;
        for (double y : ys) {
            total += predictive_log_density(posterior(prior, stats), y);
            stats = update_stats(stats, y);
        }
        return total;
    };

    const double reference = chain_log_density(values);
    // cross-check the chain against the closed-form marginal likelihood
    CHECK(reference ==
          doctest::Approx(oracle::log_marginal_likelihood(prior, values)).epsilon(1e-10));

    std::vector<double> shuffled = values;
    for (int rep = 0; rep < 20; ++rep) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(std::abs(chain_log_density(shuffled) - reference) < 1e-8);
    }
}
