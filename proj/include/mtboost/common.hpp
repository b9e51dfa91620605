#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtboost {

// Thrown for invalid hyperparameters, invalid method/scheme combinations,
// malformed CLI arguments. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown for unreadable/ill-formed datasets and schema mismatches.
// Maps to exit code 3 in the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Feature-space descriptor: features [0, continuous) are real-valued and
// split by threshold, features [continuous, continuous+binary) take values
// in {0, 1} and split by equality.
struct FeatureSchema {
    int continuous = 0;
    int binary = 0;

    int total() const { return continuous + binary; }
    bool is_binary(int feature) const { return feature >= continuous; }

    bool operator==(const FeatureSchema&) const = default;
};

// Model-ready data: row-major feature matrix plus targets.
struct Dataset {
    FeatureSchema schema;
    std::vector<double> x;  // n * schema.total(), row-major
    std::vector<double> y;

    std::size_t n() const { return y.size(); }

    std::span<const double> row(std::size_t i) const {
        const std::size_t k = static_cast<std::size_t>(schema.total());
        return {x.data() + i * k, k};
    }

    void add_row(std::span<const double> features, double target) {
        x.insert(x.end(), features.begin(), features.end());
        y.push_back(target);
    }

    // First `count` rows, same schema.
    Dataset head(std::size_t count) const {
        Dataset out;
        out.schema = schema;
        const std::size_t k = static_cast<std::size_t>(schema.total());
        out.x.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(count * k));
        out.y.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(count));
        return out;
    }
};

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic seed splitting: the seed for a named sub-stream depends only
// on the master seed and the tag path, never on evaluation order. Replicates
// scheduled on different threads therefore see identical streams.
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
    uint64_t s = master;
    for (uint64_t tag : path) {
        s ^= 0x9e3779b97f4a7c15ull + tag;
        splitmix64(s);
    }
    uint64_t t = s;
    return splitmix64(t);
}

inline double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace mtboost
