#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtboost/common.hpp"

// Benchmark-dataset ingestion: typed CSV loading with missing-row removal,
// train-fold-only standardization and encoding, and seeded k-fold splits.

namespace mtboost {

enum class ColumnKind { Continuous, Ordinal, Nominal, Target, Drop };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    // For ordinal columns the order defines the label encoding; filled by
    // scanning (lexicographic) when not preset.
    std::vector<std::string> categories;
};

struct Column {
    ColumnSpec spec;
    std::vector<double> numeric;  // continuous / target
    std::vector<int> codes;       // ordinal / nominal, index into spec.categories
};

struct RawTable {
    std::vector<Column> columns;  // dropped columns excluded

    std::size_t n_rows() const {
        if (columns.empty()) return 0;
        const Column& c = columns.front();
        return c.numeric.empty() ? c.codes.size() : c.numeric.size();
    }
    int target_index() const;
};

struct CsvOptions {
    char delimiter = ',';
    bool has_header = true;
    std::vector<std::string> na_tokens = {"", "NA", "?"};
};

// Typed table per spec; rows containing a missing cell in any used column are
// dropped. Errors on unreadable files, unparseable numeric cells, header
// mismatches, and categories outside a preset list.
RawTable load_csv(const std::string& path, std::vector<ColumnSpec> spec,
                  const CsvOptions& options = {});

// Train-fold-only encoding. Continuous columns and the target are
// standardized with train statistics; ordinal columns are label encoded
// (two-level ones become binary features, longer scales become real-valued
// features); nominal columns become a binary feature (two categories) or
// one-hot columns. Category maps contain train-fold categories only, so
// held-out rows can fail with an unseen category: such rows are excluded and
// reported through `warnings`.
class Transformer {
public:
    Dataset transform(const RawTable& table, std::span<const int> rows,
                      std::vector<std::string>* warnings = nullptr,
                      std::vector<int>* kept_rows = nullptr) const;

    const FeatureSchema& schema() const { return schema_; }
    double target_mean() const { return target_mean_; }
    double target_sd() const { return target_sd_; }
    const std::vector<std::string>& fit_warnings() const { return fit_warnings_; }

private:
    friend std::pair<Dataset, Transformer> fit_transform(const RawTable& table,
                                                         std::span<const int> train_rows);

    struct ContSlot {
        int column = -1;
        double mean = 0.0;
        double sd = 1.0;
        bool constant = false;
    };
    struct OrdinalSlot {
        int column = -1;
        std::vector<int> code_map;  // table code -> train label, -1 if unseen
        bool binary = false;
    };
    struct NominalSlot {
        int column = -1;
        std::vector<int> code_map;  // table code -> train category position, -1 unseen
        int num_train_categories = 0;
        bool binary = false;  // exactly two train categories -> single 0/1 feature
    };

    FeatureSchema schema_{};
    std::vector<ContSlot> continuous_;
    std::vector<OrdinalSlot> wide_ordinals_;  // >2 levels, real-valued slots
    std::vector<OrdinalSlot> binary_ordinals_;
    std::vector<NominalSlot> nominals_;
    int target_column_ = -1;
    double target_mean_ = 0.0;
    double target_sd_ = 1.0;
    std::vector<std::string> fit_warnings_;
};

std::pair<Dataset, Transformer> fit_transform(const RawTable& table,
                                              std::span<const int> train_rows);

// Seeded random partition into k near-equal disjoint folds covering all rows.
std::vector<std::vector<int>> kfold(std::size_t n_rows, int k, std::uint64_t seed);

// ---- dataset manifest -----------------------------------------------------

struct ManifestSource {
    std::string kind;    // "url" or "sklearn"
    std::string url;     // when kind == url
    std::string detail;  // free-form provenance note
};

struct ManifestEntry {
    std::string name;
    std::string file;  // relative to the data directory
    ManifestSource source;
    CsvOptions csv;
    std::vector<ColumnSpec> columns;
    std::string notes;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
const ManifestEntry& find_dataset(const std::vector<ManifestEntry>& manifest,
                                  const std::string& name);
RawTable load_dataset(const ManifestEntry& entry, const std::string& data_dir);

}  // namespace mtboost
