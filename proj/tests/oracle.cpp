#include "oracle.hpp"

#include <cmath>

namespace mtboost::oracle {

namespace {

struct ClosedFormPosterior {
    double m, kappa, alpha, beta;
};

// Independent re-derivation of the conjugate update: literal two-pass mean
// and sum of squared deviations.
ClosedFormPosterior conjugate(const NormalGammaParams& prior,
                              const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    if (values.empty()) return {prior.m, prior.kappa, prior.alpha, prior.beta};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    ClosedFormPosterior post;
    post.kappa = prior.kappa + n;
    post.alpha = prior.alpha + 0.5 * n;
    post.m = (prior.kappa * prior.m + n * mean) / post.kappa;
    post.beta = prior.beta + 0.5 * ss +
                0.5 * prior.kappa * n * (mean - prior.m) * (mean - prior.m) / post.kappa;
    return post;
}

}  // namespace

double log_marginal_likelihood(const NormalGammaParams& prior,
                               const std::vector<double>& values) {
    const ClosedFormPosterior post = conjugate(prior, values);
    const double n = static_cast<double>(values.size());
    return -0.5 * n * std::log(2.0 * M_PI) +
           0.5 * (std::log(prior.kappa) - std::log(post.kappa)) + std::lgamma(post.alpha) -
           std::lgamma(prior.alpha) + prior.alpha * std::log(prior.beta) -
           post.alpha * std::log(post.beta);
}

double log_predictive_density(const NormalGammaParams& prior,
                              const std::vector<double>& values, double y) {
    std::vector<double> extended = values;
    extended.push_back(y);
    return log_marginal_likelihood(prior, extended) - log_marginal_likelihood(prior, values);
}

double posterior_location(const NormalGammaParams& prior,
                          const std::vector<double>& values) {
    return conjugate(prior, values).m;
}

double integrate(const std::function<double(double)>& f, double lo, double hi, int n) {
    if (n % 2 != 0) ++n;
    const double h = (hi - lo) / n;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + h * i) * (i % 2 == 0 ? 2.0 : 4.0);
    return acc * h / 3.0;
}

namespace {

double normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * M_PI * variance);
}

double gamma_pdf(double x, double shape, double rate) {
    if (x <= 0.0) return 0.0;
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
                    std::lgamma(shape));
}

}  // namespace

double predictive_density_quadrature(const NormalGammaParams& prior, double y) {
    const double tau_hi =
        (prior.alpha + 50.0 + 50.0 * std::sqrt(prior.alpha)) / prior.beta;
    const auto outer = [&](double tau) -> double {
        if (tau <= 0.0) return 0.0;
        const double sd = std::max(1.0 / std::sqrt(tau), 1.0 / std::sqrt(prior.kappa * tau));
        const double lo = std::min(y, prior.m) - 45.0 * sd;
        const double hi = std::max(y, prior.m) + 45.0 * sd;
        const auto inner = [&](double mu) {
            return normal_pdf(y, mu, 1.0 / tau) * normal_pdf(mu, prior.m, 1.0 / (prior.kappa * tau));
        };
        return gamma_pdf(tau, prior.alpha, prior.beta) * integrate(inner, lo, hi, 1200);
    };
    return integrate(outer, 0.0, tau_hi, 3000);
}

PosteriorMoments posterior_moments_quadrature(const NormalGammaParams& prior,
                                              const std::vector<double>& values) {
    // Closed-form parameters are used only to place the integration window.
    const ClosedFormPosterior post = conjugate(prior, values);
    const double mu_scale = std::sqrt(post.beta / (post.alpha * post.kappa));
    const double mu_lo = post.m - 40.0 * mu_scale;
    const double mu_hi = post.m + 40.0 * mu_scale;
    const double tau_hi = (post.alpha + 50.0 + 50.0 * std::sqrt(post.alpha)) / post.beta;

    const auto joint = [&](double mu, double tau) {
        double log_p = std::log(gamma_pdf(tau, prior.alpha, prior.beta)) +
                       std::log(normal_pdf(mu, prior.m, 1.0 / (prior.kappa * tau)));
        for (double v : values) log_p += std::log(normal_pdf(v, mu, 1.0 / tau));
        return std::exp(log_p);
    };

    const auto outer = [&](const std::function<double(double, double)>& weight) {
        return integrate(
            [&](double tau) {
                if (tau <= 0.0) return 0.0;
                return integrate([&](double mu) { return joint(mu, tau) * weight(mu, tau); },
                                 mu_lo, mu_hi, 800);
            },
            0.0, tau_hi, 1600);
    };

    const double z = outer([](double, double) { return 1.0; });
    const double e_mu = outer([](double mu, double) { return mu; }) / z;
    const double e_tau = outer([](double, double tau) { return tau; }) / z;
    const double e_mu2 = outer([](double mu, double) { return mu * mu; }) / z;

    return PosteriorMoments{e_mu, e_tau, e_mu2 - e_mu * e_mu};
}

// ---- subtree enumeration ----------------------------------------------------

namespace {

struct SubtreeDesc {
    std::vector<int> leaves;
    std::vector<int> internal;
    double log_prior = 0.0;
};

void cross_product(const std::vector<SubtreeDesc>& left,
                   const std::vector<SubtreeDesc>& right, int node, double log_g,
                   std::vector<SubtreeDesc>& out) {
    for (const SubtreeDesc& l : left) {
        for (const SubtreeDesc& r : right) {
            SubtreeDesc d;
            d.leaves = l.leaves;
            d.leaves.insert(d.leaves.end(), r.leaves.begin(), r.leaves.end());
            d.internal.push_back(node);
            d.internal.insert(d.internal.end(), l.internal.begin(), l.internal.end());
            d.internal.insert(d.internal.end(), r.internal.begin(), r.internal.end());
            d.log_prior = log_g + l.log_prior + r.log_prior;
            out.push_back(std::move(d));
        }
    }
}

std::vector<SubtreeDesc> enumerate_node(const std::vector<MetaTreeNode>& nodes, int node) {
    const MetaTreeNode& n = nodes[static_cast<std::size_t>(node)];
    std::vector<SubtreeDesc> out;
    if (!n.split) {
        // g is zero at skeleton leaves, so the leaf option carries prior 1.
        out.push_back(SubtreeDesc{{node}, {}, 0.0});
        return out;
    }
    const double g = n.g_prior;
    if (g < 1.0)
        out.push_back(SubtreeDesc{{node}, {}, std::log1p(-g)});
    if (g > 0.0) {
        const std::vector<SubtreeDesc> left = enumerate_node(nodes, n.left);
        const std::vector<SubtreeDesc> right = enumerate_node(nodes, n.right);
        cross_product(left, right, node, std::log(g), out);
    }
    return out;
}

int route_step(const MetaTreeNode& node, std::span<const double> x,
               const FeatureSchema& schema) {
    const Split& split = *node.split;
    const double v = x[static_cast<std::size_t>(split.feature)];
    if (schema.is_binary(split.feature)) return v == 0.0 ? node.left : node.right;
    return v <= *split.threshold ? node.left : node.right;
}

double log_sum_exp(const std::vector<double>& v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

}  // namespace

SubtreeMixture enumerate_subtrees(const MetaTree& tree, const Dataset& train,
                                  std::span<const double> x, double y) {
    const std::vector<MetaTreeNode>& nodes = tree.nodes();
    const FeatureSchema& schema = tree.schema();
    const NormalGammaParams& prior = tree.prior();

    // Targets routed through each node.
    std::vector<std::vector<double>> routed(nodes.size());
    for (std::size_t i = 0; i < train.n(); ++i) {
        int node = 0;
        routed[0].push_back(train.y[i]);
        while (nodes[static_cast<std::size_t>(node)].split) {
            node = route_step(nodes[static_cast<std::size_t>(node)], train.row(i), schema);
            routed[static_cast<std::size_t>(node)].push_back(train.y[i]);
        }
    }

    // Query path: the leaf of each subtree that contains x is the first
    // subtree leaf along this path.
    std::vector<int> query_path;
    {
        int node = 0;
        query_path.push_back(0);
        while (nodes[static_cast<std::size_t>(node)].split) {
            node = route_step(nodes[static_cast<std::size_t>(node)], x, schema);
            query_path.push_back(node);
        }
    }

    const std::vector<SubtreeDesc> subtrees = enumerate_node(nodes, 0);

    std::vector<double> log_joint(subtrees.size());      // log p(T) + log ML(T)
    std::vector<double> log_query_density(subtrees.size());
    std::vector<double> query_mean(subtrees.size());
    for (std::size_t t = 0; t < subtrees.size(); ++t) {
        const SubtreeDesc& sub = subtrees[t];
        double log_ml = 0.0;
        for (int leaf : sub.leaves)
            log_ml += log_marginal_likelihood(prior, routed[static_cast<std::size_t>(leaf)]);
        log_joint[t] = sub.log_prior + log_ml;

        int query_leaf = -1;
        for (int node : query_path) {
            for (int leaf : sub.leaves)
                if (leaf == node) query_leaf = node;
            if (query_leaf >= 0) break;
        }
        const std::vector<double>& leaf_values =
            routed[static_cast<std::size_t>(query_leaf)];
        log_query_density[t] = log_predictive_density(prior, leaf_values, y);
        query_mean[t] = posterior_location(prior, leaf_values);
    }

    SubtreeMixture out;
    out.num_subtrees = static_cast<int>(subtrees.size());
    out.log_marginal = log_sum_exp(log_joint);

    std::vector<double> log_posterior(subtrees.size());
    for (std::size_t t = 0; t < subtrees.size(); ++t)
        log_posterior[t] = log_joint[t] - out.log_marginal;

    std::vector<double> density_terms(subtrees.size());
    double mean = 0.0;
    for (std::size_t t = 0; t < subtrees.size(); ++t) {
        density_terms[t] = log_posterior[t] + log_query_density[t];
        mean += std::exp(log_posterior[t]) * query_mean[t];
    }
    out.log_mixture_density = log_sum_exp(density_terms);
    out.mixture_mean = mean;

    out.posterior_internal.assign(nodes.size(), 0.0);
    out.posterior_member.assign(nodes.size(), 0.0);
    for (std::size_t t = 0; t < subtrees.size(); ++t) {
        const double w = std::exp(log_posterior[t]);
        for (int node : subtrees[t].internal) {
            out.posterior_internal[static_cast<std::size_t>(node)] += w;
            out.posterior_member[static_cast<std::size_t>(node)] += w;
        }
        for (int node : subtrees[t].leaves)
            out.posterior_member[static_cast<std::size_t>(node)] += w;
    }
    return out;
}

}  // namespace mtboost::oracle
