#include "mtboost/metatree.hpp"

#include <array>
#include <cmath>

namespace mtboost {

namespace {

// Representative-tree depth is capped well below path-buffer size.
constexpr int kMaxDepth = 48;

int child_for(const MetaTreeNode& node, std::span<const double> x,
              const FeatureSchema& schema) {
    const Split& split = *node.split;
    const double v = x[static_cast<std::size_t>(split.feature)];
    if (schema.is_binary(split.feature)) return v == 0.0 ? node.left : node.right;
    return v <= *split.threshold ? node.left : node.right;
}

}  // namespace

MetaTree::MetaTree(std::vector<MetaTreeNode> nodes, FeatureSchema schema,
                   NormalGammaParams prior)
    : nodes_(std::move(nodes)), schema_(schema), prior_(prior) {
    validate();
}

MetaTree MetaTree::restore(std::vector<MetaTreeNode> nodes, FeatureSchema schema,
                           NormalGammaParams prior, double log_ml) {
    MetaTree t(std::move(nodes), schema, prior);
    t.log_ml_ = log_ml;
    return t;
}

void MetaTree::validate() const {
    if (nodes_.empty()) throw ConfigError("meta-tree: empty skeleton");
    if (depth() > kMaxDepth) throw ConfigError("meta-tree: depth exceeds limit");
    for (const MetaTreeNode& node : nodes_) {
        const bool has_split = node.split.has_value();
        const bool has_children = node.left >= 0 && node.right >= 0;
        if (has_split != has_children)
            throw ConfigError("meta-tree: node must have both children or neither");
        if (!has_split && (node.g_prior != 0.0 || node.g_post != 0.0))
            throw ConfigError("meta-tree: leaf nodes require g = 0");
        if (node.g_prior < 0.0 || node.g_prior > 1.0 || node.g_post < 0.0 ||
            node.g_post > 1.0)
            throw ConfigError("meta-tree: g outside [0, 1]");
        if (has_split) {
            const Split& s = node.split.value();
            if (s.feature < 0 || s.feature >= schema_.total())
                throw ConfigError("meta-tree: split feature out of range");
            if (schema_.is_binary(s.feature) == s.threshold.has_value())
                throw ConfigError(
                    "meta-tree: threshold present iff the feature is continuous");
        }
    }
}

int MetaTree::depth() const {
    // Nodes are stored root-first; children always follow parents, so a
    // single forward pass suffices.
    std::vector<int> level(nodes_.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].split) {
            level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
        }
        deepest = std::max(deepest, level[i]);
    }
    return deepest;
}

std::vector<int> MetaTree::route(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != schema_.total())
        throw DataError("route: feature vector arity mismatch");
    for (int j = 0; j < schema_.total(); ++j) {
        const double v = x[static_cast<std::size_t>(j)];
        if (!std::isfinite(v)) throw DataError("route: non-finite feature value");
        if (schema_.is_binary(j) && v != 0.0 && v != 1.0)
            throw DataError("route: binary feature must be 0 or 1");
    }
    std::vector<int> path;
    int node = 0;
    path.push_back(node);
    while (nodes_[static_cast<std::size_t>(node)].split) {
        node = child_for(nodes_[static_cast<std::size_t>(node)], x, schema_);
        path.push_back(node);
    }
    return path;
}

double MetaTree::predictive_log_density(std::span<const double> x, double y) const {
    const std::vector<int> path = route(x);
    const int m = static_cast<int>(path.size()) - 1;
    std::array<double, kMaxDepth + 2> log_tilde{};
    for (int i = m; i >= 0; --i) {
        const MetaTreeNode& node = nodes_[static_cast<std::size_t>(path[i])];
        const double log_q = mtboost::predictive_log_density(posterior(prior_, node.stats), y);
        if (i == m || node.g_post <= 0.0) {
            log_tilde[i] = log_q;
        } else if (node.g_post >= 1.0) {
            log_tilde[i] = log_tilde[i + 1];
        } else {
            log_tilde[i] = log_add_exp(std::log1p(-node.g_post) + log_q,
                                       std::log(node.g_post) + log_tilde[i + 1]);
        }
    }
    return log_tilde[0];
}

double MetaTree::predict(std::span<const double> x) const {
    const std::vector<int> path = route(x);
    const int m = static_cast<int>(path.size()) - 1;
    double mean = 0.0;
    for (int i = m; i >= 0; --i) {
        const MetaTreeNode& node = nodes_[static_cast<std::size_t>(path[i])];
        const double node_mean = predictive_mean(posterior(prior_, node.stats));
        if (i == m)
            mean = node_mean;
        else
            mean = (1.0 - node.g_post) * node_mean + node.g_post * mean;
    }
    return mean;
}

void MetaTree::fit_one(std::span<const double> x, double y) {
    if (!std::isfinite(y)) throw std::invalid_argument("fit_one: non-finite target");
    const std::vector<int> path = route(x);
    const int m = static_cast<int>(path.size()) - 1;

    // All predictive terms are evaluated at the pre-update state before any
    // mutation: densities first, then g, then stats.
    std::array<double, kMaxDepth + 2> log_tilde{};
    for (int i = m; i >= 0; --i) {
        MetaTreeNode& node = nodes_[static_cast<std::size_t>(path[i])];
        const double log_q = mtboost::predictive_log_density(posterior(prior_, node.stats), y);
        if (i == m || node.g_post <= 0.0) {
            log_tilde[i] = log_q;
        } else if (node.g_post >= 1.0) {
            log_tilde[i] = log_tilde[i + 1];
        } else {
            log_tilde[i] = log_add_exp(std::log1p(-node.g_post) + log_q,
                                       std::log(node.g_post) + log_tilde[i + 1]);
        }
    }

    log_ml_ += log_tilde[0];

    for (int i = 0; i < m; ++i) {
        MetaTreeNode& node = nodes_[static_cast<std::size_t>(path[i])];
        if (node.g_post <= 0.0 || node.g_post >= 1.0) continue;  // absorbing states
        const double log_g =
            std::log(node.g_post) + log_tilde[i + 1] - log_tilde[i];
        node.g_post = std::min(1.0, std::exp(log_g));
    }
    for (int i = 0; i <= m; ++i) {
        MetaTreeNode& node = nodes_[static_cast<std::size_t>(path[i])];
        node.stats = update_stats(node.stats, y);
    }
}

void MetaTree::fit(const Dataset& data) {
    for (std::size_t i = 0; i < data.n(); ++i) fit_one(data.row(i), data.y[i]);
}

}  // namespace mtboost
