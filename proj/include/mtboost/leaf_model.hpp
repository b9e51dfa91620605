#pragma once

#include <cstdint>

#include "mtboost/common.hpp"

// Conjugate normal-gamma model for a single node. Observations are
// y ~ N(mu, 1/tau) with prior N(mu | m, 1/(kappa*tau)) Gam(tau | alpha, beta).
// The posterior predictive is a Student-t with dof 2*alpha, location m and
// squared scale beta*(kappa+1)/(alpha*kappa); all density work is in log
// space. Values are immutable: updates return new values.

namespace mtboost {

struct NormalGammaParams {
    double m = 0.0;
    double kappa = 2.0;
    double alpha = 2.0;
    double beta = 2.0;

    // kappa, alpha, beta must be positive; alpha > 1/2 so the predictive
    // mean exists (Student-t dof 2*alpha > 1). Checked here rather than at
    // predict time.
    static NormalGammaParams checked(double m, double kappa, double alpha, double beta);

    bool operator==(const NormalGammaParams&) const = default;
};

struct SufficientStats {
    std::int64_t n = 0;
    double sum_y = 0.0;
    double sum_y_sq = 0.0;

    bool operator==(const SufficientStats&) const = default;
};

// stats with one more observation y; rejects non-finite y.
SufficientStats update_stats(const SufficientStats& stats, double y);

// Conjugate posterior of `prior` given `stats`. n = 0 returns the prior.
NormalGammaParams posterior(const NormalGammaParams& prior, const SufficientStats& stats);

// log Student-t density of the posterior predictive at y.
double predictive_log_density(const NormalGammaParams& post, double y);

// Mean of the posterior predictive (the location parameter).
double predictive_mean(const NormalGammaParams& post);

}  // namespace mtboost
