#pragma once

#include <string>
#include <vector>

#include "mtboost/data.hpp"
#include "mtboost/synthetic.hpp"

// Experiment runners. Every emitted row carries the master seed and a hash of
// the full configuration; re-running a configuration reproduces its output
// byte for byte.

namespace mtboost {

// Method tags wired to their weight schemes and default learning rates:
//   mt_gbdt        gbdt/gbdt weights, learning rate 0.1
//   mt_uni_uni     uniform/uniform, learning rate 1.0
//   mt_uni_pos     uniform/posterior, learning rate 1.0
//   mt_pos_pos     posterior/posterior, learning rate 1.0
//   gbdt_baseline  classical boosting baseline, learning rate 0.1
//   oracle, zero   reference predictors (synthetic experiments only)
MethodSpec make_method(const std::string& tag, int num_trees, int d_max, double g,
                       const NormalGammaParams& prior, int min_samples_leaf);
bool is_known_method_tag(const std::string& tag);

enum class ExperimentScale { Desk, Paper };

struct ExperimentConfig {
    std::uint64_t seed = 20240501;
    ExperimentScale scale = ExperimentScale::Desk;
    int threads = 1;
    std::string out_dir = ".";
    std::string data_dir = "datasets";
    std::string manifest_path = "datasets/manifest.json";
    std::vector<std::string> datasets;  // experiment 3; empty selects the scale default
};

// Synthetic-data risk comparison across training-set sizes.
std::vector<RiskRow> run_experiment1(const ExperimentConfig& config);

// Depth sweep: meta-tree depth 3..6 against true-tree depth 3, 5, 7.
std::vector<RiskRow> run_experiment2(const ExperimentConfig& config);

struct CvRow {
    std::string dataset;
    std::string method;
    int d_max = 0;
    int fold = 0;
    int repeat = 0;
    double mse = 0.0;
    std::uint64_t seed = 0;
};

struct CvSummaryRow {
    std::string dataset;
    std::string method;
    int d_max = 0;
    double mean_mse = 0.0;
    double stderr_mse = 0.0;
};

struct Experiment3Result {
    std::vector<CvRow> rows;
    std::vector<CvSummaryRow> summary;
};

// Repeated k-fold cross-validation on benchmark datasets; MSE is measured on
// the standardized target. Missing dataset files are reported together, by
// name, before any work starts.
Experiment3Result run_experiment3(const ExperimentConfig& config);

std::uint64_t fnv1a64(const std::string& text);
std::string experiment_config_hash(const ExperimentConfig& config, int which);

// CSV emission; returns the paths written.
std::vector<std::string> write_experiment_csv(const ExperimentConfig& config, int which,
                                              const std::vector<RiskRow>& rows);
std::vector<std::string> write_experiment3_csv(const ExperimentConfig& config,
                                               const Experiment3Result& result);

}  // namespace mtboost
