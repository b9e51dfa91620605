#include "mtboost/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

namespace mtboost {

int RawTable::target_index() const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].spec.kind == ColumnKind::Target) return static_cast<int>(i);
    throw DataError("table has no target column");
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == delimiter && !quoted) {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

bool is_missing(const std::string& cell, const std::vector<std::string>& na_tokens) {
    return std::find(na_tokens.begin(), na_tokens.end(), cell) != na_tokens.end();
}

double parse_number(const std::string& cell, const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw DataError("unparseable numeric cell '" + cell + "' in column " + column);
    }
}

}  // namespace

RawTable load_csv(const std::string& path, std::vector<ColumnSpec> spec,
                  const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    std::string line;
    if (options.has_header) {
        if (!std::getline(in, line)) throw DataError(path + ": missing header");
        const std::vector<std::string> header = split_line(line, options.delimiter);
        if (header.size() != spec.size())
            throw DataError(path + ": header has " + std::to_string(header.size()) +
                            " columns, spec expects " + std::to_string(spec.size()));
        for (std::size_t i = 0; i < spec.size(); ++i)
            if (header[i] != spec[i].name)
                throw DataError(path + ": header column '" + header[i] +
                                "' does not match spec column '" + spec[i].name + "'");
    }

    // Collect raw string rows first: missing-value removal happens before any
    // parsing so a row with one bad cell never contributes partial data.
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line, options.delimiter);
        if (cells.size() != spec.size())
            throw DataError(path + ": row with " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(spec.size()));
        bool missing = false;
        for (std::size_t i = 0; i < spec.size(); ++i) {
            if (spec[i].kind == ColumnKind::Drop) continue;
            if (is_missing(cells[i], options.na_tokens)) {
                missing = true;
                break;
            }
        }
        if (!missing) rows.push_back(std::move(cells));
    }

    RawTable table;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (spec[i].kind == ColumnKind::Drop) continue;
        Column col;
        col.spec = spec[i];
        if (spec[i].kind == ColumnKind::Continuous || spec[i].kind == ColumnKind::Target) {
            col.numeric.reserve(rows.size());
            for (const std::vector<std::string>& r : rows)
                col.numeric.push_back(parse_number(r[i], spec[i].name));
        } else {
            if (col.spec.categories.empty()) {
                std::set<std::string> seen;
                for (const std::vector<std::string>& r : rows) seen.insert(r[i]);
                col.spec.categories.assign(seen.begin(), seen.end());
            }
            std::map<std::string, int> code;
            for (std::size_t c = 0; c < col.spec.categories.size(); ++c)
                code[col.spec.categories[c]] = static_cast<int>(c);
            col.codes.reserve(rows.size());
            for (const std::vector<std::string>& r : rows) {
                const auto it = code.find(r[i]);
                if (it == code.end())
                    throw DataError(path + ": unknown category '" + r[i] + "' in column " +
                                    spec[i].name);
                col.codes.push_back(it->second);
            }
        }
        table.columns.push_back(std::move(col));
    }

    int targets = 0;
    for (const Column& c : table.columns)
        if (c.spec.kind == ColumnKind::Target) ++targets;
    if (targets != 1) throw DataError(path + ": spec must define exactly one target column");
    return table;
}

std::pair<Dataset, Transformer> fit_transform(const RawTable& table,
                                              std::span<const int> train_rows) {
    if (train_rows.empty()) throw DataError("fit_transform: empty train fold");

    Transformer tr;
    std::vector<Transformer::NominalSlot> one_hots;

    for (std::size_t ci = 0; ci < table.columns.size(); ++ci) {
        const Column& col = table.columns[ci];
        switch (col.spec.kind) {
            case ColumnKind::Target: {
                tr.target_column_ = static_cast<int>(ci);
                double sum = 0.0;
                for (int r : train_rows) sum += col.numeric[static_cast<std::size_t>(r)];
                tr.target_mean_ = sum / static_cast<double>(train_rows.size());
                double ss = 0.0;
                for (int r : train_rows) {
                    const double d =
                        col.numeric[static_cast<std::size_t>(r)] - tr.target_mean_;
                    ss += d * d;
                }
                tr.target_sd_ = std::sqrt(ss / static_cast<double>(train_rows.size()));
                if (tr.target_sd_ == 0.0) {
                    tr.target_sd_ = 1.0;
                    tr.fit_warnings_.push_back("target has zero variance in train fold");
                }
                break;
            }
            case ColumnKind::Continuous: {
                Transformer::ContSlot slot;
                slot.column = static_cast<int>(ci);
                double sum = 0.0;
                for (int r : train_rows) sum += col.numeric[static_cast<std::size_t>(r)];
                slot.mean = sum / static_cast<double>(train_rows.size());
                double ss = 0.0;
                for (int r : train_rows) {
                    const double d = col.numeric[static_cast<std::size_t>(r)] - slot.mean;
                    ss += d * d;
                }
                slot.sd = std::sqrt(ss / static_cast<double>(train_rows.size()));
                if (slot.sd == 0.0) {
                    slot.constant = true;
                    slot.sd = 1.0;
                    tr.fit_warnings_.push_back("column " + col.spec.name +
                                               " has zero variance; encoded as constant 0");
                }
                tr.continuous_.push_back(slot);
                break;
            }
            case ColumnKind::Ordinal: {
                Transformer::OrdinalSlot slot;
                slot.column = static_cast<int>(ci);
                std::set<int> present;
                for (int r : train_rows) present.insert(col.codes[static_cast<std::size_t>(r)]);
                slot.code_map.assign(col.spec.categories.size(), -1);
                int next = 0;  // spec category order defines the scale
                for (std::size_t c = 0; c < col.spec.categories.size(); ++c)
                    if (present.count(static_cast<int>(c)))
                        slot.code_map[c] = next++;
                slot.binary = next == 2;
                if (next < 2) {
                    tr.fit_warnings_.push_back("column " + col.spec.name +
                                               " has a single level in train fold; dropped");
                    break;
                }
                (slot.binary ? tr.binary_ordinals_ : tr.wide_ordinals_).push_back(slot);
                break;
            }
            case ColumnKind::Nominal: {
                Transformer::NominalSlot slot;
                slot.column = static_cast<int>(ci);
                std::set<int> present;
                for (int r : train_rows) present.insert(col.codes[static_cast<std::size_t>(r)]);
                slot.code_map.assign(col.spec.categories.size(), -1);
                int next = 0;
                for (std::size_t c = 0; c < col.spec.categories.size(); ++c)
                    if (present.count(static_cast<int>(c)))
                        slot.code_map[c] = next++;
                slot.num_train_categories = next;
                slot.binary = next == 2;
                if (next < 2) {
                    tr.fit_warnings_.push_back("column " + col.spec.name +
                                               " has a single level in train fold; dropped");
                    break;
                }
                (slot.binary ? tr.nominals_ : one_hots).push_back(slot);
                break;
            }
            case ColumnKind::Drop:
                break;
        }
    }
    if (tr.target_column_ < 0) throw DataError("fit_transform: no target column");

    // Feature layout: standardized continuous, then wide ordinals (real
    // valued), then binary two-level columns, then one-hot blocks.
    for (const Transformer::NominalSlot& n : one_hots) tr.nominals_.push_back(n);
    int binary_count = static_cast<int>(tr.binary_ordinals_.size());
    for (const Transformer::NominalSlot& n : tr.nominals_)
        binary_count += n.binary ? 1 : n.num_train_categories;
    tr.schema_ = FeatureSchema{
        static_cast<int>(tr.continuous_.size() + tr.wide_ordinals_.size()), binary_count};

    Dataset train = tr.transform(table, train_rows);
    return {std::move(train), std::move(tr)};
}

Dataset Transformer::transform(const RawTable& table, std::span<const int> rows,
                               std::vector<std::string>* warnings,
                               std::vector<int>* kept_rows) const {
    Dataset out;
    out.schema = schema_;
    std::vector<double> x(static_cast<std::size_t>(schema_.total()));

    for (int r : rows) {
        const std::size_t row = static_cast<std::size_t>(r);
        std::size_t slot = 0;
        bool skip = false;

        for (const ContSlot& c : continuous_) {
            const double v = table.columns[static_cast<std::size_t>(c.column)].numeric[row];
            x[slot++] = c.constant ? 0.0 : (v - c.mean) / c.sd;
        }
        for (const OrdinalSlot& o : wide_ordinals_) {
            const int code = table.columns[static_cast<std::size_t>(o.column)].codes[row];
            const int label = o.code_map[static_cast<std::size_t>(code)];
            if (label < 0) {
                if (warnings)
                    warnings->push_back(
                        "row " + std::to_string(r) + ": unseen category '" +
                        table.columns[static_cast<std::size_t>(o.column)]
                            .spec.categories[static_cast<std::size_t>(code)] +
                        "' in column " +
                        table.columns[static_cast<std::size_t>(o.column)].spec.name +
                        "; row excluded");
                skip = true;
                break;
            }
            x[slot++] = static_cast<double>(label);
        }
        if (!skip) {
            for (const OrdinalSlot& o : binary_ordinals_) {
                const int code = table.columns[static_cast<std::size_t>(o.column)].codes[row];
                const int label = o.code_map[static_cast<std::size_t>(code)];
                if (label < 0) {
                    if (warnings)
                        warnings->push_back(
                            "row " + std::to_string(r) + ": unseen category in column " +
                            table.columns[static_cast<std::size_t>(o.column)].spec.name +
                            "; row excluded");
                    skip = true;
                    break;
                }
                x[slot++] = static_cast<double>(label);
            }
        }
        if (!skip) {
            for (const NominalSlot& nom : nominals_) {
                const int code =
                    table.columns[static_cast<std::size_t>(nom.column)].codes[row];
                const int label = nom.code_map[static_cast<std::size_t>(code)];
                if (label < 0) {
                    if (warnings)
                        warnings->push_back(
                            "row " + std::to_string(r) + ": unseen category '" +
                            table.columns[static_cast<std::size_t>(nom.column)]
                                .spec.categories[static_cast<std::size_t>(code)] +
                            "' in column " +
                            table.columns[static_cast<std::size_t>(nom.column)].spec.name +
                            "; row excluded");
                    skip = true;
                    break;
                }
                if (nom.binary) {
                    x[slot++] = static_cast<double>(label);
                } else {
                    for (int c = 0; c < nom.num_train_categories; ++c)
                        x[slot++] = c == label ? 1.0 : 0.0;
                }
            }
        }
        if (skip) continue;

        const double y =
            (table.columns[static_cast<std::size_t>(target_column_)].numeric[row] -
             target_mean_) /
            target_sd_;
        out.add_row(x, y);
        if (kept_rows) kept_rows->push_back(r);
    }
    return out;
}

std::vector<std::vector<int>> kfold(std::size_t n_rows, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold: k must be >= 2");
    if (n_rows < static_cast<std::size_t>(k)) throw ConfigError("kfold: need n_rows >= k");

    std::vector<int> order(n_rows);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    const std::size_t base = n_rows / static_cast<std::size_t>(k);
    const std::size_t extra = n_rows % static_cast<std::size_t>(k);
    std::size_t at = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                        order.begin() + static_cast<std::ptrdiff_t>(at + size));
        std::sort(folds[f].begin(), folds[f].end());
        at += size;
    }
    return folds;
}

// ---- manifest ---------------------------------------------------------------

namespace {

ColumnKind parse_kind(const std::string& kind) {
    if (kind == "continuous") return ColumnKind::Continuous;
    if (kind == "ordinal") return ColumnKind::Ordinal;
    if (kind == "nominal") return ColumnKind::Nominal;
    if (kind == "target") return ColumnKind::Target;
    if (kind == "drop") return ColumnKind::Drop;
    throw DataError("manifest: unknown column kind '" + kind + "'");
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }

    std::vector<ManifestEntry> entries;
    for (const nlohmann::json& d : doc.at("datasets")) {
        ManifestEntry entry;
        entry.name = d.at("name").get<std::string>();
        entry.file = d.at("file").get<std::string>();
        entry.source.kind = d.at("source").at("kind").get<std::string>();
        entry.source.url = d.at("source").value("url", "");
        entry.source.detail = d.at("source").value("detail", "");
        if (d.contains("csv")) {
            const nlohmann::json& c = d.at("csv");
            const std::string delim = c.value("delimiter", ",");
            entry.csv.delimiter = delim.empty() ? ',' : delim[0];
            entry.csv.has_header = c.value("header", true);
            if (c.contains("na_tokens"))
                entry.csv.na_tokens = c.at("na_tokens").get<std::vector<std::string>>();
        }
        for (const nlohmann::json& col : d.at("columns")) {
            ColumnSpec spec;
            spec.name = col.at("name").get<std::string>();
            spec.kind = parse_kind(col.at("kind").get<std::string>());
            if (col.contains("categories"))
                spec.categories = col.at("categories").get<std::vector<std::string>>();
            entry.columns.push_back(std::move(spec));
        }
        entry.notes = d.value("notes", "");
        entries.push_back(std::move(entry));
    }
    return entries;
}

const ManifestEntry& find_dataset(const std::vector<ManifestEntry>& manifest,
                                  const std::string& name) {
    for (const ManifestEntry& e : manifest)
        if (e.name == name) return e;
    throw DataError("dataset '" + name + "' not present in manifest");
}

RawTable load_dataset(const ManifestEntry& entry, const std::string& data_dir) {
    const std::string path = data_dir + "/" + entry.file;
    return load_csv(path, entry.columns, entry.csv);
}

}  // namespace mtboost
