#pragma once

#include <string>
#include <variant>
#include <vector>

#include "mtboost/ensemble.hpp"

// Model persistence: a self-describing JSON text format. Numbers round-trip
// exactly (shortest-representation doubles) and output is byte-stable, so
// serialize/parse/serialize is the identity on the file.

namespace mtboost {

// Column metadata recorded at training time so prediction inputs can be
// validated and reordered by name.
struct ColumnBinding {
    std::vector<std::string> feature_names;  // model feature order
    std::string target_name;
};

struct Model {
    std::variant<Ensemble, GbdtBaseline> impl;
    ColumnBinding columns;
    std::string method_tag;
    std::uint64_t seed = 0;

    double predict(std::span<const double> x) const;
    const FeatureSchema& schema() const;
};

std::string to_json_string(const Model& model);
Model model_from_json(const std::string& text);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

std::string to_json_string(const MetaTree& tree);
MetaTree metatree_from_json(const std::string& text);

}  // namespace mtboost
