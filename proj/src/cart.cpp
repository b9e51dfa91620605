#include "mtboost/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtboost/kernels.hpp"

namespace mtboost {

namespace {

// A candidate replaces the incumbent only when it improves by more than this;
// the first candidate must clear it outright. Kills the rounding residue left
// by constant targets and makes tie-breaking deterministic.
constexpr double kTieTolerance = 1e-12;

double centered_pair_reduction(double sum_left, std::int64_t n_left, double total,
                               std::int64_t n, double base) {
    const double right = total - sum_left;
    return sum_left * sum_left / static_cast<double>(n_left) +
           right * right / static_cast<double>(n - static_cast<std::int64_t>(n_left)) -
           base;
}

}  // namespace

int RepTree::route_leaf(std::span<const double> x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].split) {
        const RepNode& rn = nodes[static_cast<std::size_t>(node)];
        const Split& s = *rn.split;
        const double v = x[static_cast<std::size_t>(s.feature)];
        const bool go_left = schema.is_binary(s.feature) ? v == 0.0 : v <= *s.threshold;
        node = go_left ? rn.left : rn.right;
    }
    return node;
}

std::optional<SplitCandidate> best_split(const Dataset& data, std::span<const int> rows,
                                         int min_samples_leaf) {
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    if (n == 0) throw DataError("best_split: empty rows");
    const int k = data.schema.total();
    const int msl = std::max(1, min_samples_leaf);

    // Two-pass: targets centered on the node mean, then all sums of squares
    // are taken over deviations.
    std::vector<double> centered(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        centered[static_cast<std::size_t>(i)] = data.y[static_cast<std::size_t>(rows[i])];
    const double mean = kernels::reduce_sum(centered) / static_cast<double>(n);
    for (double& c : centered) c -= mean;

    std::optional<SplitCandidate> best;
    double best_red = 0.0;
    if (n < 2 * msl) return best;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::vector<double> values(static_cast<std::size_t>(n));
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1);
    std::vector<unsigned char> valid(static_cast<std::size_t>(n) + 1);

    for (int f = 0; f < k; ++f) {
        if (data.schema.is_binary(f)) {
            double sum0 = 0.0, total = 0.0;
            std::int64_t n0 = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                const double c = centered[static_cast<std::size_t>(i)];
                total += c;
                if (data.row(static_cast<std::size_t>(rows[i]))[static_cast<std::size_t>(f)] ==
                    0.0) {
                    sum0 += c;
                    ++n0;
                }
            }
            const std::int64_t n1 = n - n0;
            if (n0 < msl || n1 < msl) continue;
            const double base = total * total / static_cast<double>(n);
            const double red = centered_pair_reduction(sum0, n0, total, n, base);
            if (red > best_red + kTieTolerance) {
                best_red = red;
                best = SplitCandidate{Split{f, std::nullopt}, red, n0, n1};
            }
            continue;
        }

        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double va =
                data.row(static_cast<std::size_t>(rows[a]))[static_cast<std::size_t>(f)];
            const double vb =
                data.row(static_cast<std::size_t>(rows[b]))[static_cast<std::size_t>(f)];
            if (va != vb) return va < vb;
            return a < b;  // total order for determinism
        });
        for (std::int64_t i = 0; i < n; ++i)
            values[static_cast<std::size_t>(i)] = data.row(static_cast<std::size_t>(
                rows[order[static_cast<std::size_t>(i)]]))[static_cast<std::size_t>(f)];

        prefix[0] = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            prefix[static_cast<std::size_t>(i) + 1] =
                prefix[static_cast<std::size_t>(i)] +
                centered[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        valid[0] = 0;
        valid[static_cast<std::size_t>(n)] = 0;
        for (std::int64_t i = 1; i < n; ++i)
            valid[static_cast<std::size_t>(i)] =
                (i >= msl && n - i >= msl &&
                 values[static_cast<std::size_t>(i) - 1] < values[static_cast<std::size_t>(i)])
                    ? 1
                    : 0;

        const kernels::SplitScanResult scan =
            kernels::split_scan(prefix, valid, best_red + kTieTolerance);
        if (scan.index < 0) continue;

        const double lo = values[static_cast<std::size_t>(scan.index) - 1];
        const double hi = values[static_cast<std::size_t>(scan.index)];
        double threshold = lo + (hi - lo) * 0.5;
        if (!(threshold < hi)) threshold = lo;  // keep routing consistent with the cut
        best_red = scan.reduction;
        best = SplitCandidate{Split{f, threshold}, scan.reduction, scan.index,
                              n - scan.index};
    }
    return best;
}

std::optional<SplitCandidate> best_split(const Dataset& data, int min_samples_leaf) {
    std::vector<int> rows(data.n());
    std::iota(rows.begin(), rows.end(), 0);
    return best_split(data, rows, min_samples_leaf);
}

namespace {

void build_node(const Dataset& data, std::vector<int>& rows, int depth, int d_max,
                int msl, std::vector<RepNode>& nodes) {
    const std::size_t self = nodes.size();
    nodes.emplace_back();

    if (depth >= d_max || static_cast<int>(rows.size()) < 2 * msl) return;
    const std::optional<SplitCandidate> cand = best_split(data, rows, msl);
    if (!cand) return;

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(static_cast<std::size_t>(cand->left_count));
    right_rows.reserve(static_cast<std::size_t>(cand->right_count));
    const Split& s = cand->split;
    for (int r : rows) {
        const double v = data.row(static_cast<std::size_t>(r))[static_cast<std::size_t>(s.feature)];
        const bool go_left = data.schema.is_binary(s.feature) ? v == 0.0 : v <= *s.threshold;
        (go_left ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes[self].split = s;
    nodes[self].left = static_cast<int>(nodes.size());
    build_node(data, left_rows, depth + 1, d_max, msl, nodes);
    nodes[self].right = static_cast<int>(nodes.size());
    build_node(data, right_rows, depth + 1, d_max, msl, nodes);
}

}  // namespace

RepTree build_tree(const Dataset& data, int d_max, int min_samples_leaf) {
    if (data.n() == 0) throw DataError("build_tree: empty data");
    if (d_max < 0) throw ConfigError("build_tree: d_max must be >= 0");
    RepTree tree;
    tree.schema = data.schema;
    std::vector<int> rows(data.n());
    std::iota(rows.begin(), rows.end(), 0);
    build_node(data, rows, 0, d_max, std::max(1, min_samples_leaf), tree.nodes);
    return tree;
}

MetaTree build_meta_tree(const RepTree& rep, double g, const NormalGammaParams& prior) {
    if (g < 0.0 || g > 1.0) throw ConfigError("build_meta_tree: g outside [0, 1]");
    std::vector<MetaTreeNode> nodes(rep.nodes.size());
    for (std::size_t i = 0; i < rep.nodes.size(); ++i) {
        nodes[i].split = rep.nodes[i].split;
        nodes[i].left = rep.nodes[i].left;
        nodes[i].right = rep.nodes[i].right;
        const double gi = rep.nodes[i].split ? g : 0.0;
        nodes[i].g_prior = gi;
        nodes[i].g_post = gi;
    }
    return MetaTree(std::move(nodes), rep.schema, prior);
}

}  // namespace mtboost
