#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtboost/data.hpp"
#include "mtboost/ensemble.hpp"
#include "mtboost/experiments.hpp"
#include "mtboost/kernels.hpp"
#include "mtboost/metrics.hpp"
#include "mtboost/serialize.hpp"

namespace {

using namespace mtboost;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct NumericTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;  // column-major
    std::size_t n_rows = 0;
};

NumericTable read_numeric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");

    NumericTable table;
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        table.names.push_back(cell);
    }
    table.columns.resize(table.names.size());

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::size_t col = 0;
        while (std::getline(row, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            if (col >= table.names.size())
                throw DataError(path + ": row with too many cells");
            try {
                table.columns[col].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError(path + ": unparseable cell '" + cell + "'");
            }
            ++col;
        }
        if (col != table.names.size()) throw DataError(path + ": short row");
        ++table.n_rows;
    }
    return table;
}

bool column_is_binary(const std::vector<double>& values) {
    for (double v : values)
        if (v != 0.0 && v != 1.0) return false;
    return true;
}

struct TrainCsv {
    Dataset data;
    ColumnBinding columns;
};

// Continuous feature columns come first, 0/1-valued columns after, matching
// the feature-space convention used everywhere else.
TrainCsv dataset_from_csv(const NumericTable& table, const std::string& target) {
    if (table.names.empty()) throw DataError("train: no columns");
    const std::string target_name = target.empty() ? table.names.back() : target;
    int target_col = -1;
    for (std::size_t i = 0; i < table.names.size(); ++i)
        if (table.names[i] == target_name) target_col = static_cast<int>(i);
    if (target_col < 0) throw DataError("train: target column '" + target_name + "' not found");

    std::vector<int> continuous, binary;
    for (std::size_t i = 0; i < table.names.size(); ++i) {
        if (static_cast<int>(i) == target_col) continue;
        (column_is_binary(table.columns[i]) ? binary : continuous)
            .push_back(static_cast<int>(i));
    }

    TrainCsv out;
    out.columns.target_name = target_name;
    for (int c : continuous)
        out.columns.feature_names.push_back(table.names[static_cast<std::size_t>(c)]);
    for (int c : binary)
        out.columns.feature_names.push_back(table.names[static_cast<std::size_t>(c)]);

    out.data.schema = FeatureSchema{static_cast<int>(continuous.size()),
                                    static_cast<int>(binary.size())};
    std::vector<double> x(static_cast<std::size_t>(out.data.schema.total()));
    for (std::size_t r = 0; r < table.n_rows; ++r) {
        std::size_t slot = 0;
        for (int c : continuous) x[slot++] = table.columns[static_cast<std::size_t>(c)][r];
        for (int c : binary) x[slot++] = table.columns[static_cast<std::size_t>(c)][r];
        out.data.add_row(x, table.columns[static_cast<std::size_t>(target_col)][r]);
    }
    return out;
}

std::string hash_train_config(const std::string& method, const TrainConfig& c,
                              std::uint64_t seed) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "method=%s;B=%d;d_max=%d;g=%.17g;lr=%.17g;msl=%d;prior=%.17g,%.17g,%.17g,"
                  "%.17g;fit_res=%d;seed=%llu",
                  method.c_str(), c.num_trees, c.d_max, c.g, c.learning_rate,
                  c.min_samples_leaf, c.leaf_prior.m, c.leaf_prior.kappa,
                  c.leaf_prior.alpha, c.leaf_prior.beta, c.fit_trees_on_residuals ? 1 : 0,
                  static_cast<unsigned long long>(seed));
    char out[17];
    std::snprintf(out, sizeof out, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(buf)));
    return out;
}

struct CommonOptions {
    std::uint64_t seed = 1;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string data_dir;
};

std::string default_data_dir() {
    if (const char* env = std::getenv("MTBOOST_DATA_DIR")) return env;
    return "datasets";
}

int cmd_train(const CommonOptions& common, const std::string& input,
              const std::string& target, const std::string& method,
              const TrainConfig& base_config, const std::string& out_path,
              const std::string& report_path) {
    if (!is_known_method_tag(method) || method == "oracle" || method == "zero")
        throw ConfigError("train: unknown method '" + method + "'");

    const auto t0 = std::chrono::steady_clock::now();
    const NumericTable table = read_numeric_csv(input);
    TrainCsv csv = dataset_from_csv(table, target);
    if (csv.data.n() == 0) throw DataError("train: no data rows in " + input);

    MethodSpec spec = make_method(method, base_config.num_trees, base_config.d_max,
                                  base_config.g, base_config.leaf_prior,
                                  base_config.min_samples_leaf);

    Model model;
    model.method_tag = method;
    model.seed = common.seed;
    model.columns = csv.columns;

    std::vector<double> train_pred;
    if (spec.kind == MethodSpec::Kind::Baseline) {
        spec.baseline.learning_rate = base_config.learning_rate > 0.0
                                          ? base_config.learning_rate
                                          : spec.baseline.learning_rate;
        GbdtBaseline trained = GbdtBaseline::train(csv.data, spec.baseline);
        train_pred = trained.predict_many(csv.data);
        model.impl = std::move(trained);
    } else {
        if (base_config.learning_rate > 0.0)
            spec.train.learning_rate = base_config.learning_rate;
        spec.train.fit_trees_on_residuals = base_config.fit_trees_on_residuals;
        Ensemble trained = Ensemble::train(csv.data, spec.train);
        train_pred = trained.predict_many(csv.data);
        model.impl = std::move(trained);
    }

    save_model(out_path, model);

    const double sse = sum_squared_error(csv.data.y, train_pred);
    const double mse = mean_squared_error(csv.data.y, train_pred);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string hash = hash_train_config(method, spec.train, common.seed);

    nlohmann::ordered_json report{
        {"method", method},         {"n_rows", csv.data.n()},
        {"train_sse", sse},         {"train_mse", mse},
        {"wall_time_seconds", wall}, {"seed", common.seed},
        {"config_hash", hash},      {"model_file", out_path},
    };
    const std::string text = report.dump(2) + "\n";
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        if (!out) throw DataError("cannot write " + report_path);
        out << text;
    }
    std::cout << text;
    return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& input,
                const std::string& out_path) {
    const Model model = load_model(model_path);
    const NumericTable table = read_numeric_csv(input);

    // Features are matched by name so column order in the input is free.
    std::vector<int> source(model.columns.feature_names.size(), -1);
    for (std::size_t f = 0; f < model.columns.feature_names.size(); ++f) {
        for (std::size_t c = 0; c < table.names.size(); ++c)
            if (table.names[c] == model.columns.feature_names[f])
                source[f] = static_cast<int>(c);
        if (source[f] < 0)
            throw DataError("predict: input is missing feature column '" +
                            model.columns.feature_names[f] + "'");
    }

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + out_path);
    out << "prediction\n";
    std::vector<double> x(model.columns.feature_names.size());
    char buf[40];
    for (std::size_t r = 0; r < table.n_rows; ++r) {
        for (std::size_t f = 0; f < x.size(); ++f)
            x[f] = table.columns[static_cast<std::size_t>(source[f])][r];
        std::snprintf(buf, sizeof buf, "%.17g", model.predict(x));
        out << buf << '\n';
    }
    return kExitOk;
}

int cmd_experiment(const CommonOptions& common, int which, const std::string& scale,
                   const std::string& out_dir, const std::string& manifest,
                   const std::vector<std::string>& datasets) {
    ExperimentConfig config;
    config.seed = common.seed;
    config.threads = common.threads;
    config.out_dir = out_dir;
    config.data_dir = common.data_dir;
    config.manifest_path = manifest;
    config.datasets = datasets;
    if (scale == "paper")
        config.scale = ExperimentScale::Paper;
    else if (scale == "desk")
        config.scale = ExperimentScale::Desk;
    else
        throw ConfigError("experiment: scale must be desk or paper");

    std::filesystem::create_directories(out_dir);

    std::vector<std::string> files;
    if (which == 1) {
        files = write_experiment_csv(config, 1, run_experiment1(config));
    } else if (which == 2) {
        files = write_experiment_csv(config, 2, run_experiment2(config));
    } else if (which == 3) {
        files = write_experiment3_csv(config, run_experiment3(config));
    } else {
        throw ConfigError("experiment: --which must be 1, 2 or 3");
    }
    for (const std::string& f : files) std::cout << "wrote " << f << "\n";
    return kExitOk;
}

int fetch_one(const ManifestEntry& entry, const std::string& data_dir) {
    const std::string dest = data_dir + "/" + entry.file;
    if (std::ifstream(dest).good()) {
        std::cout << entry.name << ": already present\n";
        return 0;
    }
    std::string command;
    if (entry.source.kind == "sklearn") {
        command =
            "python3 -c \""
            "import numpy as np\n"
            "from sklearn.datasets import load_diabetes\n"
            "d = load_diabetes(scaled=False)\n"
            "cols = list(d.feature_names) + ['target']\n"
            "arr = np.column_stack([d.data, d.target])\n"
            "lines = [','.join(cols)]\n"
            "lines += [','.join(format(v, '.17g') for v in row) for row in arr]\n"
            "open('" + dest + "', 'w').write('\\n'.join(lines) + '\\n')\n"
            "\"";
    } else if (entry.source.kind == "url") {
        command = "curl -fsSL --retry 2 -o '" + dest + ".part' '" + entry.source.url +
                  "' && mv '" + dest + ".part' '" + dest + "'";
    } else {
        std::cout << entry.name << ": unknown source kind '" << entry.source.kind << "'\n";
        return 1;
    }
    const int rc = std::system(command.c_str());
    if (rc != 0) {
        std::remove((dest + ".part").c_str());
        return 1;
    }
    return 0;
}

int cmd_fetch_data(const CommonOptions& common, const std::string& manifest_path,
                   std::vector<std::string> names) {
    const std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
    std::filesystem::create_directories(common.data_dir);
    if (names.empty())
        for (const ManifestEntry& e : manifest) names.push_back(e.name);

    std::vector<std::string> failed;
    for (const std::string& name : names) {
        const ManifestEntry& entry = find_dataset(manifest, name);
        if (fetch_one(entry, common.data_dir) == 0) {
            std::cout << entry.name << ": ok (" << common.data_dir << "/" << entry.file
                      << ")\n";
        } else {
            failed.push_back(name);
        }
    }
    if (!failed.empty()) {
        std::string message = "fetch failed for:";
        for (const std::string& name : failed) message += " " + name;
        throw DataError(message);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meta-tree boosting regression: training, prediction and experiments"};
    app.set_config("--config", "", "structured config file (flags take precedence)");

    CommonOptions common;
    common.data_dir = default_data_dir();
    app.add_option("--seed", common.seed, "master random seed")->capture_default_str();
    app.add_option("--threads", common.threads, "worker pool size")->capture_default_str();
    app.add_option("--data-dir", common.data_dir,
                   "dataset directory (env MTBOOST_DATA_DIR)")
        ->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "train a model on a numeric CSV");
    std::string train_input, train_target, train_method = "mt_uni_uni";
    std::string train_out = "model.json", train_report;
    TrainConfig train_config;
    train_config.num_trees = 100;
    train_config.d_max = 5;
    train_config.learning_rate = 0.0;  // 0 means: use the method default
    train->add_option("--input", train_input, "training CSV (header row required)")
        ->required();
    train->add_option("--target", train_target, "target column (default: last column)");
    train->add_option("--method", train_method,
                      "mt_gbdt | mt_uni_uni | mt_uni_pos | mt_pos_pos | gbdt_baseline")
        ->capture_default_str();
    train->add_option("--trees,--B", train_config.num_trees, "ensemble size B")
        ->capture_default_str();
    train->add_option("--d-max", train_config.d_max, "maximum tree depth")
        ->capture_default_str();
    train->add_option("--g", train_config.g, "prior probability a node is internal")
        ->capture_default_str();
    train->add_option("--learning-rate", train_config.learning_rate,
                      "shrinkage (default per method: 0.1 gbdt-style, 1.0 otherwise)");
    train->add_option("--min-samples-leaf", train_config.min_samples_leaf,
                      "minimum rows per leaf in the structure search")
        ->capture_default_str();
    double prior_m = 0.0, prior_kappa = 2.0, prior_alpha = 2.0, prior_beta = 2.0;
    train->add_option("--prior-m", prior_m, "leaf prior location")->capture_default_str();
    train->add_option("--prior-kappa", prior_kappa, "leaf prior precision scale")
        ->capture_default_str();
    train->add_option("--prior-alpha", prior_alpha, "leaf prior shape")
        ->capture_default_str();
    train->add_option("--prior-beta", prior_beta, "leaf prior rate")->capture_default_str();
    train->add_flag("--fit-on-residuals", train_config.fit_trees_on_residuals,
                    "probability modes: condition leaf posteriors on residuals");
    train->add_option("--out", train_out, "model file")->capture_default_str();
    train->add_option("--report", train_report, "also write the training report here");

    // predict
    auto* predict = app.add_subcommand("predict", "predict with a saved model");
    std::string predict_model, predict_input, predict_out = "predictions.csv";
    predict->add_option("--model", predict_model, "model file")->required();
    predict->add_option("--input", predict_input, "input CSV")->required();
    predict->add_option("--out", predict_out, "output CSV")->capture_default_str();

    // experiment
    auto* experiment = app.add_subcommand("experiment", "run a built-in experiment");
    int which = 1;
    std::string scale = "desk", out_dir = "results";
    std::string manifest = "datasets/manifest.json";
    std::vector<std::string> datasets;
    experiment->add_option("--which", which, "1, 2 or 3")->required();
    experiment->add_option("--scale", scale, "desk | paper")->capture_default_str();
    experiment->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    experiment->add_option("--manifest", manifest, "dataset manifest path")
        ->capture_default_str();
    experiment->add_option("--datasets", datasets,
                           "experiment 3 dataset subset (default per scale)");

    // fetch-data
    auto* fetch = app.add_subcommand("fetch-data", "materialize benchmark datasets");
    std::string fetch_manifest = "datasets/manifest.json";
    std::vector<std::string> fetch_names;
    fetch->add_option("--manifest", fetch_manifest, "dataset manifest path")
        ->capture_default_str();
    fetch->add_option("--datasets", fetch_names, "names to fetch (default: all)");

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed()) {
            train_config.leaf_prior =
                NormalGammaParams::checked(prior_m, prior_kappa, prior_alpha, prior_beta);
            return cmd_train(common, train_input, train_target, train_method,
                             train_config, train_out, train_report);
        }
        if (predict->parsed()) return cmd_predict(predict_model, predict_input, predict_out);
        if (experiment->parsed())
            return cmd_experiment(common, which, scale, out_dir, manifest, datasets);
        if (fetch->parsed()) return cmd_fetch_data(common, fetch_manifest, fetch_names);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
