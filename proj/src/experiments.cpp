#include "mtboost/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "mtboost/metrics.hpp"

namespace mtboost {

MethodSpec make_method(const std::string& tag, int num_trees, int d_max, double g,
                       const NormalGammaParams& prior, int min_samples_leaf) {
    MethodSpec spec;
    spec.name = tag;
    if (tag == "gbdt_baseline") {
        spec.kind = MethodSpec::Kind::Baseline;
        spec.baseline.num_trees = num_trees;
        spec.baseline.d_max = d_max;
        spec.baseline.learning_rate = 0.1;
        spec.baseline.min_samples_leaf = 1;
        return spec;
    }
    if (tag == "oracle") {
        spec.kind = MethodSpec::Kind::Oracle;
        return spec;
    }
    if (tag == "zero") {
        spec.kind = MethodSpec::Kind::Zero;
        return spec;
    }

    spec.kind = MethodSpec::Kind::MetaTree;
    spec.train.num_trees = num_trees;
    spec.train.d_max = d_max;
    spec.train.g = g;
    spec.train.leaf_prior = prior;
    spec.train.min_samples_leaf = min_samples_leaf;
    if (tag == "mt_gbdt") {
        spec.train.scheme = WeightScheme::checked(WeightKind::Gbdt, WeightKind::Gbdt);
        spec.train.learning_rate = 0.1;
    } else if (tag == "mt_uni_uni") {
        spec.train.scheme = WeightScheme::checked(WeightKind::Uniform, WeightKind::Uniform);
        spec.train.learning_rate = 1.0;
    } else if (tag == "mt_uni_pos") {
        spec.train.scheme =
            WeightScheme::checked(WeightKind::Uniform, WeightKind::Posterior);
        spec.train.learning_rate = 1.0;
    } else if (tag == "mt_pos_pos") {
        spec.train.scheme =
            WeightScheme::checked(WeightKind::Posterior, WeightKind::Posterior);
        spec.train.learning_rate = 1.0;
    } else {
        throw ConfigError("unknown method tag '" + tag + "'");
    }
    return spec;
}

bool is_known_method_tag(const std::string& tag) {
    static const std::vector<std::string> tags = {
        "mt_gbdt", "mt_uni_uni", "mt_uni_pos", "mt_pos_pos",
        "gbdt_baseline", "oracle", "zero"};
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

namespace {

const NormalGammaParams kExperimentPrior{0.0, 2.0, 2.0, 2.0};

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    for (const std::string& line : lines) out << line << '\n';
}

RiskConfig scale_risk_config(const ExperimentConfig& config) {
    RiskConfig rc;
    rc.seed = config.seed;
    rc.threads = config.threads;
    if (config.scale == ExperimentScale::Paper) {
        rc.n_trees = 100;
        rc.n_datasets = 10;
    } else {
        rc.n_trees = 10;
        rc.n_datasets = 2;
    }
    return rc;
}

int scale_num_trees(const ExperimentConfig& config) {
    return config.scale == ExperimentScale::Paper ? 100 : 20;
}

}  // namespace

std::string experiment_config_hash(const ExperimentConfig& config, int which) {
    std::string canonical = "experiment=" + std::to_string(which);
    canonical += ";scale=";
    canonical += config.scale == ExperimentScale::Paper ? "paper" : "desk";
    canonical += ";seed=" + std::to_string(config.seed);
    if (which == 3) {
        for (const std::string& d : config.datasets) canonical += ";dataset=" + d;
    }
    return hex64(fnv1a64(canonical));
}

std::vector<RiskRow> run_experiment1(const ExperimentConfig& config) {
    RiskConfig rc = scale_risk_config(config);
    rc.n_train = {200, 400, 600, 800, 1000};
    rc.n_test = 250;
    rc.num_features = 10;
    rc.d_max_star = 3;
    rc.g_star = 0.9;
    rc.true_prior = kExperimentPrior;

    const int trees = scale_num_trees(config);
    for (const char* tag : {"mt_gbdt", "mt_uni_uni", "mt_pos_pos", "gbdt_baseline", "oracle"})
        rc.methods.push_back(make_method(tag, trees, 5, 0.6, kExperimentPrior, 5));
    return approx_bayes_risk(rc);
}

std::vector<RiskRow> run_experiment2(const ExperimentConfig& config) {
    const int trees = scale_num_trees(config);
    std::vector<RiskRow> rows;
    for (int d_max_star : {3, 5, 7}) {
        RiskConfig rc = scale_risk_config(config);
        rc.seed = derive_seed(config.seed, {20, static_cast<std::uint64_t>(d_max_star)});
        rc.n_train = {1000};
        rc.n_test = 250;
        rc.num_features = 10;
        rc.d_max_star = d_max_star;
        rc.g_star = 0.9;
        rc.true_prior = kExperimentPrior;
        for (int d_max : {3, 4, 5, 6})
            for (const char* tag : {"mt_gbdt", "mt_uni_uni", "mt_uni_pos", "mt_pos_pos"})
                rc.methods.push_back(
                    make_method(tag, trees, d_max, 0.6, kExperimentPrior, 5));
        std::vector<RiskRow> part = approx_bayes_risk(rc);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

Experiment3Result run_experiment3(const ExperimentConfig& config) {
    std::vector<std::string> names = config.datasets;
    if (names.empty()) {
        if (config.scale == ExperimentScale::Paper)
            names = {"abalone", "cps", "diabetes", "liver", "ozone", "student"};
        else
            names = {"diabetes", "liver"};
    }

    const std::vector<ManifestEntry> manifest = load_manifest(config.manifest_path);

    // All inputs are checked up front so a missing file is reported by name
    // rather than discovered mid-run.
    std::vector<std::string> missing;
    std::vector<const ManifestEntry*> entries;
    for (const std::string& name : names) {
        const ManifestEntry& entry = find_dataset(manifest, name);
        std::ifstream probe(config.data_dir + "/" + entry.file);
        if (!probe)
            missing.push_back(name);
        else
            entries.push_back(&entry);
    }
    if (!missing.empty()) {
        std::string message = "missing datasets:";
        for (const std::string& name : missing) message += " " + name;
        message += " (run fetch-data first)";
        throw DataError(message);
    }

    constexpr int kRepeats = 3;
    constexpr int kFolds = 5;
    const std::vector<int> depths = {4, 8};
    const std::vector<std::string> tags = {"mt_gbdt", "mt_uni_uni", "mt_pos_pos",
                                           "gbdt_baseline"};

    Experiment3Result result;
    struct Task {
        std::size_t dataset_index;
        int repeat;
        int fold;
    };
    std::vector<Task> tasks;
    std::vector<RawTable> tables;
    std::vector<std::vector<std::vector<std::vector<int>>>> fold_sets;  // [ds][rep][fold]

    for (std::size_t di = 0; di < entries.size(); ++di) {
        tables.push_back(load_dataset(*entries[di], config.data_dir));
        fold_sets.emplace_back();
        const std::uint64_t name_tag = fnv1a64(entries[di]->name);
        for (int rep = 0; rep < kRepeats; ++rep) {
            fold_sets.back().push_back(
                kfold(tables.back().n_rows(), kFolds,
                      derive_seed(config.seed, {3, name_tag, static_cast<std::uint64_t>(rep)})));
            for (int f = 0; f < kFolds; ++f) tasks.push_back(Task{di, rep, f});
        }
    }

    // mse[task][method][depth]
    std::vector<std::vector<std::vector<double>>> mse(
        tasks.size(),
        std::vector<std::vector<double>>(tags.size(), std::vector<double>(depths.size())));

    auto run_task = [&](std::size_t ti) {
        const Task& task = tasks[ti];
        const RawTable& table = tables[task.dataset_index];
        const std::vector<int>& test_rows =
            fold_sets[task.dataset_index][static_cast<std::size_t>(task.repeat)]
                     [static_cast<std::size_t>(task.fold)];
        std::vector<int> train_rows;
        train_rows.reserve(table.n_rows() - test_rows.size());
        for (int r = 0; r < static_cast<int>(table.n_rows()); ++r)
            if (!std::binary_search(test_rows.begin(), test_rows.end(), r))
                train_rows.push_back(r);

        auto [train, transformer] = fit_transform(table, train_rows);
        std::vector<std::string> warnings;
        const Dataset test = transformer.transform(table, test_rows, &warnings);

        for (std::size_t mi = 0; mi < tags.size(); ++mi) {
            for (std::size_t zi = 0; zi < depths.size(); ++zi) {
                const MethodSpec method = make_method(tags[mi], 100, depths[zi], 0.6,
                                                      kExperimentPrior, 5);
                std::vector<double> pred;
                if (method.kind == MethodSpec::Kind::Baseline) {
                    pred = GbdtBaseline::train(train, method.baseline).predict_many(test);
                } else {
                    pred = Ensemble::train(train, method.train).predict_many(test);
                }
                mse[ti][mi][zi] = mean_squared_error(test.y, pred);
            }
        }
    };

    const int workers = std::max(1, config.threads);
    if (workers == 1) {
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t ti = next.fetch_add(1); ti < tasks.size();
                     ti = next.fetch_add(1))
                    run_task(ti);
            });
        for (std::thread& th : pool) th.join();
    }

    // Fixed output order: dataset, method, depth, repeat, fold.
    for (std::size_t di = 0; di < entries.size(); ++di) {
        for (std::size_t mi = 0; mi < tags.size(); ++mi) {
            for (std::size_t zi = 0; zi < depths.size(); ++zi) {
                double sum = 0.0;
                std::vector<double> values;
                for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
                    if (tasks[ti].dataset_index != di) continue;
                    result.rows.push_back(CvRow{entries[di]->name, tags[mi], depths[zi],
                                                tasks[ti].fold, tasks[ti].repeat,
                                                mse[ti][mi][zi], config.seed});
                    values.push_back(mse[ti][mi][zi]);
                    sum += mse[ti][mi][zi];
                }
                const double mean = sum / static_cast<double>(values.size());
                double var = 0.0;
                for (double v : values) var += (v - mean) * (v - mean);
                const double se = values.size() > 1
                                      ? std::sqrt(var / static_cast<double>(values.size() - 1) /
                                                  static_cast<double>(values.size()))
                                      : 0.0;
                result.summary.push_back(
                    CvSummaryRow{entries[di]->name, tags[mi], depths[zi], mean, se});
            }
        }
    }
    return result;
}

std::vector<std::string> write_experiment_csv(const ExperimentConfig& config, int which,
                                              const std::vector<RiskRow>& rows) {
    const std::string hash = experiment_config_hash(config, which);
    const std::string prefix = config.out_dir + "/exp" + std::to_string(which);

    std::vector<std::string> results;
    results.push_back("method,n,d_max,d_max_star,mean_mse,stderr,seed,config_hash");
    for (const RiskRow& r : rows)
        results.push_back(r.method + "," + std::to_string(r.n) + "," +
                          std::to_string(r.d_max) + "," + std::to_string(r.d_max_star) +
                          "," + format_double(r.mean_mse) + "," +
                          format_double(r.stderr_mse) + "," + std::to_string(r.seed) + "," +
                          hash);
    write_lines(prefix + "_results.csv", results);

    std::vector<std::string> plot;
    plot.push_back("experiment,series,x,y,yerr,seed,config_hash");
    for (const RiskRow& r : rows) {
        const std::string series =
            which == 2 ? r.method + "@dstar" + std::to_string(r.d_max_star) : r.method;
        const int x = which == 2 ? r.d_max : r.n;
        plot.push_back("exp" + std::to_string(which) + "," + series + "," +
                       std::to_string(x) + "," + format_double(r.mean_mse) + "," +
                       format_double(r.stderr_mse) + "," + std::to_string(r.seed) + "," +
                       hash);
    }
    write_lines(prefix + "_plot.csv", plot);
    return {prefix + "_results.csv", prefix + "_plot.csv"};
}

std::vector<std::string> write_experiment3_csv(const ExperimentConfig& config,
                                               const Experiment3Result& result) {
    const std::string hash = experiment_config_hash(config, 3);
    const std::string prefix = config.out_dir + "/exp3";

    std::vector<std::string> lines;
    lines.push_back("dataset,method,d_max,fold,repeat,mse,seed,config_hash");
    for (const CvRow& r : result.rows)
        lines.push_back(r.dataset + "," + r.method + "," + std::to_string(r.d_max) + "," +
                        std::to_string(r.fold) + "," + std::to_string(r.repeat) + "," +
                        format_double(r.mse) + "," + std::to_string(r.seed) + "," + hash);
    write_lines(prefix + "_cv.csv", lines);

    std::vector<std::string> summary;
    summary.push_back("dataset,method,d_max,mean_mse,stderr,seed,config_hash");
    for (const CvSummaryRow& r : result.summary)
        summary.push_back(r.dataset + "," + r.method + "," + std::to_string(r.d_max) + "," +
                          format_double(r.mean_mse) + "," + format_double(r.stderr_mse) +
                          "," + std::to_string(config.seed) + "," + hash);
    write_lines(prefix + "_summary.csv", summary);
    return {prefix + "_cv.csv", prefix + "_summary.csv"};
}

}  // namespace mtboost
