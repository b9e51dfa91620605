#include "mtboost/serialize.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace mtboost {

using ordered_json = nlohmann::ordered_json;

double Model::predict(std::span<const double> x) const {
    if (std::holds_alternative<Ensemble>(impl)) return std::get<Ensemble>(impl).predict(x);
    return std::get<GbdtBaseline>(impl).predict(x);
}

const FeatureSchema& Model::schema() const {
    if (std::holds_alternative<Ensemble>(impl)) return std::get<Ensemble>(impl).schema();
    return std::get<GbdtBaseline>(impl).schema();
}

namespace {

ordered_json schema_to_json(const FeatureSchema& schema) {
    return ordered_json{{"continuous", schema.continuous}, {"binary", schema.binary}};
}

FeatureSchema schema_from_json(const ordered_json& j) {
    return FeatureSchema{j.at("continuous").get<int>(), j.at("binary").get<int>()};
}

ordered_json params_to_json(const NormalGammaParams& p) {
    return ordered_json{
        {"m", p.m}, {"kappa", p.kappa}, {"alpha", p.alpha}, {"beta", p.beta}};
}

NormalGammaParams params_from_json(const ordered_json& j) {
    return NormalGammaParams::checked(j.at("m").get<double>(), j.at("kappa").get<double>(),
                                      j.at("alpha").get<double>(),
                                      j.at("beta").get<double>());
}

ordered_json split_to_json(const std::optional<Split>& split) {
    if (!split) return nullptr;
    ordered_json j{{"feature", split->feature}};
    if (split->threshold)
        j["threshold"] = *split->threshold;
    else
        j["threshold"] = nullptr;
    return j;
}

std::optional<Split> split_from_json(const ordered_json& j) {
    if (j.is_null()) return std::nullopt;
    Split s;
    s.feature = j.at("feature").get<int>();
    if (!j.at("threshold").is_null()) s.threshold = j.at("threshold").get<double>();
    return s;
}

ordered_json metatree_to_json(const MetaTree& tree) {
    ordered_json nodes = ordered_json::array();
    for (const MetaTreeNode& node : tree.nodes()) {
        const NormalGammaParams post = posterior(tree.prior(), node.stats);
        nodes.push_back(ordered_json{
            {"split", split_to_json(node.split)},
            {"left", node.left},
            {"right", node.right},
            {"g_prior", node.g_prior},
            {"g_post", node.g_post},
            {"stats",
             ordered_json{{"n", node.stats.n},
                          {"sum_y", node.stats.sum_y},
                          {"sum_y_sq", node.stats.sum_y_sq}}},
            {"posterior", params_to_json(post)},
        });
    }
    return ordered_json{
        {"format", "mtboost.metatree"},
        {"version", 1},
        {"schema", schema_to_json(tree.schema())},
        {"prior", params_to_json(tree.prior())},
        {"log_marginal_likelihood", tree.log_marginal_likelihood()},
        {"nodes", std::move(nodes)},
    };
}

MetaTree metatree_from_json_obj(const ordered_json& j) {
    if (j.value("format", "") != "mtboost.metatree")
        throw DataError("model file: expected a meta-tree record");
    const NormalGammaParams prior = params_from_json(j.at("prior"));
    std::vector<MetaTreeNode> nodes;
    for (const ordered_json& nj : j.at("nodes")) {
        MetaTreeNode node;
        node.split = split_from_json(nj.at("split"));
        node.left = nj.at("left").get<int>();
        node.right = nj.at("right").get<int>();
        node.g_prior = nj.at("g_prior").get<double>();
        node.g_post = nj.at("g_post").get<double>();
        const ordered_json& st = nj.at("stats");
        node.stats = SufficientStats{st.at("n").get<std::int64_t>(),
                                     st.at("sum_y").get<double>(),
                                     st.at("sum_y_sq").get<double>()};
        if (node.stats.n < 0 || (node.stats.n == 0 && (node.stats.sum_y != 0.0 ||
                                                       node.stats.sum_y_sq != 0.0)))
            throw DataError("model file: invalid sufficient statistics");
        // The stored posterior is redundant with prior + stats; verify it so
        // hand-edited files fail loudly.
        const NormalGammaParams expected = posterior(prior, node.stats);
        const NormalGammaParams stored = params_from_json(nj.at("posterior"));
        const auto close = [](double a, double b) {
            return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
        };
        if (!close(expected.m, stored.m) || !close(expected.kappa, stored.kappa) ||
            !close(expected.alpha, stored.alpha) || !close(expected.beta, stored.beta))
            throw DataError("model file: posterior inconsistent with stats");
        nodes.push_back(node);
    }
    return MetaTree::restore(std::move(nodes), schema_from_json(j.at("schema")), prior,
                             j.at("log_marginal_likelihood").get<double>());
}

std::string weight_kind_name(WeightKind k) {
    switch (k) {
        case WeightKind::Gbdt: return "gbdt";
        case WeightKind::Uniform: return "uniform";
        case WeightKind::Posterior: return "posterior";
    }
    throw ConfigError("unknown weight kind");
}

WeightKind weight_kind_from(const std::string& name) {
    if (name == "gbdt") return WeightKind::Gbdt;
    if (name == "uniform") return WeightKind::Uniform;
    if (name == "posterior") return WeightKind::Posterior;
    throw DataError("model file: unknown weight kind '" + name + "'");
}

ordered_json ensemble_to_json(const Ensemble& model) {
    const TrainConfig& c = model.config();
    ordered_json trees = ordered_json::array();
    for (const MetaTree& tree : model.trees()) trees.push_back(metatree_to_json(tree));
    return ordered_json{
        {"model_type", "metatree_ensemble"},
        {"scheme",
         ordered_json{{"learning", weight_kind_name(c.scheme.learning)},
                      {"prediction", weight_kind_name(c.scheme.prediction)}}},
        {"learning_rate", c.learning_rate},
        {"num_trees", c.num_trees},
        {"d_max", c.d_max},
        {"g", c.g},
        {"min_samples_leaf", c.min_samples_leaf},
        {"fit_trees_on_residuals", c.fit_trees_on_residuals},
        {"leaf_prior", params_to_json(c.leaf_prior)},
        {"f0", model.f0()},
        {"prediction_weights", model.prediction_weights()},
        {"schema", schema_to_json(model.schema())},
        {"trees", std::move(trees)},
    };
}

Ensemble ensemble_from_json_obj(const ordered_json& j) {
    TrainConfig config;
    config.scheme =
        WeightScheme::checked(weight_kind_from(j.at("scheme").at("learning")),
                              weight_kind_from(j.at("scheme").at("prediction")));
    config.learning_rate = j.at("learning_rate").get<double>();
    config.num_trees = j.at("num_trees").get<int>();
    config.d_max = j.at("d_max").get<int>();
    config.g = j.at("g").get<double>();
    config.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    config.fit_trees_on_residuals = j.at("fit_trees_on_residuals").get<bool>();
    config.leaf_prior = params_from_json(j.at("leaf_prior"));

    std::vector<MetaTree> trees;
    for (const ordered_json& tj : j.at("trees")) trees.push_back(metatree_from_json_obj(tj));
    return Ensemble::restore(config, schema_from_json(j.at("schema")), std::move(trees),
                             j.at("prediction_weights").get<std::vector<double>>(),
                             j.at("f0").get<double>());
}

ordered_json baseline_to_json(const GbdtBaseline& model) {
    ordered_json trees = ordered_json::array();
    for (const PlainTree& tree : model.trees()) {
        ordered_json nodes = ordered_json::array();
        for (const RepNode& node : tree.rep.nodes)
            nodes.push_back(ordered_json{{"split", split_to_json(node.split)},
                                         {"left", node.left},
                                         {"right", node.right}});
        trees.push_back(
            ordered_json{{"nodes", std::move(nodes)}, {"leaf_values", tree.leaf_values}});
    }
    const BaselineConfig& c = model.config();
    return ordered_json{
        {"model_type", "gbdt_baseline"},
        {"learning_rate", c.learning_rate},
        {"num_trees", c.num_trees},
        {"d_max", c.d_max},
        {"min_samples_leaf", c.min_samples_leaf},
        {"f0", model.f0()},
        {"schema", schema_to_json(model.schema())},
        {"trees", std::move(trees)},
    };
}

GbdtBaseline baseline_from_json_obj(const ordered_json& j) {
    BaselineConfig config;
    config.learning_rate = j.at("learning_rate").get<double>();
    config.num_trees = j.at("num_trees").get<int>();
    config.d_max = j.at("d_max").get<int>();
    config.min_samples_leaf = j.at("min_samples_leaf").get<int>();

    const FeatureSchema schema = schema_from_json(j.at("schema"));
    std::vector<PlainTree> trees;
    for (const ordered_json& tj : j.at("trees")) {
        PlainTree tree;
        tree.rep.schema = schema;
        for (const ordered_json& nj : tj.at("nodes")) {
            RepNode node;
            node.split = split_from_json(nj.at("split"));
            node.left = nj.at("left").get<int>();
            node.right = nj.at("right").get<int>();
            tree.rep.nodes.push_back(node);
        }
        tree.leaf_values = tj.at("leaf_values").get<std::vector<double>>();
        if (tree.leaf_values.size() != tree.rep.nodes.size())
            throw DataError("model file: leaf value count mismatch");
        trees.push_back(std::move(tree));
    }
    return GbdtBaseline::restore(config, schema, std::move(trees),
                                 j.at("f0").get<double>());
}

}  // namespace

std::string to_json_string(const MetaTree& tree) {
    return metatree_to_json(tree).dump(2) + "\n";
}

MetaTree metatree_from_json(const std::string& text) {
    return metatree_from_json_obj(ordered_json::parse(text));
}

std::string to_json_string(const Model& model) {
    ordered_json j{
        {"format", "mtboost.model"},
        {"version", 1},
        {"method", model.method_tag},
        {"seed", model.seed},
        {"columns",
         ordered_json{{"features", model.columns.feature_names},
                      {"target", model.columns.target_name}}},
    };
    if (std::holds_alternative<Ensemble>(model.impl))
        j["model"] = ensemble_to_json(std::get<Ensemble>(model.impl));
    else
        j["model"] = baseline_to_json(std::get<GbdtBaseline>(model.impl));
    return j.dump(2) + "\n";
}

Model model_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
    if (j.value("format", "") != "mtboost.model")
        throw DataError("model file: unrecognized format");

    Model model;
    model.method_tag = j.at("method").get<std::string>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.columns.feature_names =
        j.at("columns").at("features").get<std::vector<std::string>>();
    model.columns.target_name = j.at("columns").at("target").get<std::string>();

    const ordered_json& mj = j.at("model");
    const std::string type = mj.at("model_type").get<std::string>();
    if (type == "metatree_ensemble")
        model.impl = ensemble_from_json_obj(mj);
    else if (type == "gbdt_baseline")
        model.impl = baseline_from_json_obj(mj);
    else
        throw DataError("model file: unknown model_type '" + type + "'");
    return model;
}

void save_model(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << to_json_string(model);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return model_from_json(text);
}

}  // namespace mtboost
