#include "mtboost/leaf_model.hpp"

#include <cmath>

namespace mtboost {

NormalGammaParams NormalGammaParams::checked(double m, double kappa, double alpha,
                                             double beta) {
    if (!std::isfinite(m) || !std::isfinite(kappa) || !std::isfinite(alpha) ||
        !std::isfinite(beta))
        throw ConfigError("normal-gamma parameters must be finite");
    if (kappa <= 0.0 || beta <= 0.0)
        throw ConfigError("normal-gamma kappa and beta must be positive");
    if (alpha <= 0.5)
        throw ConfigError("normal-gamma alpha must exceed 1/2");
    return NormalGammaParams{m, kappa, alpha, beta};
}

SufficientStats update_stats(const SufficientStats& stats, double y) {
    if (!std::isfinite(y)) throw std::invalid_argument("update_stats: non-finite target");
    return SufficientStats{stats.n + 1, stats.sum_y + y, stats.sum_y_sq + y * y};
}

NormalGammaParams posterior(const NormalGammaParams& prior, const SufficientStats& stats) {
    if (stats.n == 0) return prior;
    const double n = static_cast<double>(stats.n);
    const double mean = stats.sum_y / n;
    // Cauchy-Schwarz guarantees this nonnegative; rounding can leave a tiny
    // negative residue for near-constant data.
    const double sse = std::max(0.0, stats.sum_y_sq - stats.sum_y * stats.sum_y / n);
    const double kappa_n = prior.kappa + n;
    NormalGammaParams post;
    post.kappa = kappa_n;
    post.alpha = prior.alpha + 0.5 * n;
    post.m = (prior.kappa * prior.m + stats.sum_y) / kappa_n;
    const double shift = mean - prior.m;
    post.beta = prior.beta + 0.5 * sse + 0.5 * prior.kappa * n * shift * shift / kappa_n;
    return post;
}

double predictive_log_density(const NormalGammaParams& post, double y) {
    if (!std::isfinite(y))
        throw std::invalid_argument("predictive_log_density: non-finite target");
    const double dof = 2.0 * post.alpha;
    const double scale_sq = post.beta * (post.kappa + 1.0) / (post.alpha * post.kappa);
    const double z_sq = (y - post.m) * (y - post.m) / scale_sq;
    return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
           0.5 * std::log(dof * M_PI * scale_sq) -
           0.5 * (dof + 1.0) * std::log1p(z_sq / dof);
}

double predictive_mean(const NormalGammaParams& post) { return post.m; }

}  // namespace mtboost
