#include "adr/cli.hpp"

#include "adr/log.hpp"
#include "adr/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace adr {

nlohmann::json default_config_json() {
    nlohmann::json j;
    j["method"] = "adr";
    j["hidden_dims"] = {128, 128};
    j["dropout"] = 0.5;
    j["lr_base"] = 1e-3;
    j["lr_incremental"] = 1e-4;
    j["epochs"] = 200;
    j["batch_size"] = 2000;
    j["gamma"] = 1e-3;
    j["alpha"] = 1;
    j["measure_drift"] = false;
    j["seeds"]["model_init"] = 1;
    j["seeds"]["dropout"] = 2;
    j["seeds"]["feature_buffer"] = 3;
    j["dataset"]["source"] = "sbm";
    j["dataset"]["path"] = "";
    j["dataset"]["sbm"]["blocks"] = {100, 100, 100, 100, 100, 100};
    j["dataset"]["sbm"]["p_intra"] = 0.1;
    j["dataset"]["sbm"]["p_inter"] = 0.01;
    j["dataset"]["sbm"]["feature_dim"] = 16;
    j["dataset"]["sbm"]["feature_shift"] = 1.0;
    j["dataset"]["sbm"]["seed"] = 7;
    j["task_stream"]["base_classes"] = 2;
    j["task_stream"]["increment_classes"] = 2;
    j["task_stream"]["split_ratio"] = {0.6, 0.2, 0.2};
    j["task_stream"]["seed"] = 11;
    j["task_stream"]["shuffle_classes"] = false;
    j["grid"]["gamma"] = nlohmann::json::array();
    j["grid"]["alpha"] = nlohmann::json::array();
    j["grid"]["seeds"] = nlohmann::json::array();
    j["output_dir"] = "out";
    return j;
}

namespace {

std::string type_category(const nlohmann::json& v) {
    if (v.is_object()) return "object";
    if (v.is_array()) return "array";
    if (v.is_string()) return "string";
    if (v.is_boolean()) return "bool";
    if (v.is_number()) return "number";
    return "null";
}

void merge_into(nlohmann::json& dst, const nlohmann::json& src, const std::string& path) {
    for (const auto& [key, value] : src.items()) {
        const std::string here = path.empty() ? key : path + "." + key;
        if (!dst.contains(key)) throw ConfigError("unknown config key: " + here);
        nlohmann::json& slot = dst[key];
        if (slot.is_object() && value.is_object()) {
            merge_into(slot, value, here);
            continue;
        }
        if (type_category(slot) != type_category(value))
            throw ConfigError("config key " + here + ": expected " + type_category(slot) +
                              ", got " + type_category(value));
        slot = value;
    }
}

}  // namespace

nlohmann::json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    nlohmann::json user;
    try {
        in >> user;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse failure in " + path.string() + ": " + e.what());
    }
    if (!user.is_object()) throw ConfigError("config root must be a JSON object: " + path.string());
    nlohmann::json merged = default_config_json();
    merge_into(merged, user, "");
    return merged;
}

void apply_override(nlohmann::json& cfg, const std::string& key_value) {
    const std::size_t eq = key_value.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key=value: " + key_value);
    const std::string key_path = key_value.substr(0, eq);
    const std::string raw = key_value.substr(eq + 1);

    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    nlohmann::json* slot = &cfg;
    std::stringstream ss(key_path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!slot->is_object() || !slot->contains(part))
            throw ConfigError("unknown config key in override: " + key_path);
        slot = &(*slot)[part];
    }
    if (slot->is_object()) throw ConfigError("override targets an object: " + key_path);
    if (type_category(*slot) != type_category(value))
        throw ConfigError("override " + key_path + ": expected " + type_category(*slot) +
                          ", got " + type_category(value));
    *slot = value;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& cfg) {
    ExperimentConfig out;
    try {
        out.method = method_from_name(cfg.at("method").get<std::string>());
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    }
    out.hidden_dims = cfg.at("hidden_dims").get<std::vector<int>>();
    if (out.hidden_dims.empty()) throw ConfigError("hidden_dims must be nonempty");
    for (int d : out.hidden_dims)
        if (d < 1) throw ConfigError("hidden_dims entries must be >= 1");
    out.dropout = cfg.at("dropout").get<double>();
    if (out.dropout < 0.0 || out.dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    out.lr_base = cfg.at("lr_base").get<double>();
    out.lr_incremental = cfg.at("lr_incremental").get<double>();
    if (out.lr_base < 0.0 || out.lr_incremental < 0.0)
        throw ConfigError("learning rates must be nonnegative");
    out.epochs = cfg.at("epochs").get<int>();
    if (out.epochs < 0) throw ConfigError("epochs must be >= 0");
    out.batch_size = cfg.at("batch_size").get<int>();
    if (out.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    out.gamma = cfg.at("gamma").get<double>();
    if (out.gamma < 0.0) throw ConfigError("gamma must be nonnegative");
    out.alpha = cfg.at("alpha").get<int>();
    if (out.alpha < 1) throw ConfigError("alpha must be >= 1");
    out.measure_drift = cfg.at("measure_drift").get<bool>();
    out.seed_model_init = cfg.at("seeds").at("model_init").get<std::uint64_t>();
    out.seed_dropout = cfg.at("seeds").at("dropout").get<std::uint64_t>();
    out.seed_feature_buffer = cfg.at("seeds").at("feature_buffer").get<std::uint64_t>();

    const nlohmann::json& ds = cfg.at("dataset");
    const std::string source = ds.at("source").get<std::string>();
    if (source == "files") {
        out.dataset.from_files = true;
        out.dataset.path = ds.at("path").get<std::string>();
        if (out.dataset.path.empty()) throw ConfigError("dataset.path required for source=files");
    } else if (source == "sbm") {
        out.dataset.from_files = false;
        const nlohmann::json& sbm = ds.at("sbm");
        out.dataset.sbm.blocks = sbm.at("blocks").get<std::vector<int>>();
        for (int b : out.dataset.sbm.blocks)
            if (b < 1) throw ConfigError("dataset.sbm.blocks entries must be >= 1");
        out.dataset.sbm.p_intra = sbm.at("p_intra").get<double>();
        out.dataset.sbm.p_inter = sbm.at("p_inter").get<double>();
        if (out.dataset.sbm.p_intra < 0 || out.dataset.sbm.p_intra > 1 ||
            out.dataset.sbm.p_inter < 0 || out.dataset.sbm.p_inter > 1)
            throw ConfigError("dataset.sbm edge probabilities must be in [0,1]");
        out.dataset.sbm.feature_dim = sbm.at("feature_dim").get<int>();
        if (out.dataset.sbm.feature_dim < 1)
            throw ConfigError("dataset.sbm.feature_dim must be >= 1");
        out.dataset.sbm.feature_shift = sbm.at("feature_shift").get<double>();
        out.dataset.sbm.seed = sbm.at("seed").get<std::uint64_t>();
    } else {
        throw ConfigError("dataset.source must be 'sbm' or 'files', got '" + source + "'");
    }

    const nlohmann::json& ts = cfg.at("task_stream");
    out.task_stream.base_classes = ts.at("base_classes").get<int>();
    out.task_stream.increment_classes = ts.at("increment_classes").get<int>();
    const auto ratios = ts.at("split_ratio").get<std::vector<double>>();
    if (ratios.size() != 3) throw ConfigError("task_stream.split_ratio needs 3 entries");
    out.task_stream.split_ratio = {ratios[0], ratios[1], ratios[2]};
    out.task_stream.seed = ts.at("seed").get<std::uint64_t>();
    out.task_stream.shuffle_classes = ts.at("shuffle_classes").get<bool>();
    if (out.task_stream.base_classes < 1 || out.task_stream.increment_classes < 1)
        throw ConfigError("task_stream class counts must be >= 1");

    out.output_dir = cfg.at("output_dir").get<std::string>();
    out.echo = cfg;
    return out;
}

GridSpec parse_grid(const nlohmann::json& cfg) {
    GridSpec grid;
    const nlohmann::json& g = cfg.at("grid");
    grid.gamma = g.at("gamma").get<std::vector<double>>();
    grid.alpha = g.at("alpha").get<std::vector<int>>();
    grid.seeds = g.at("seeds").get<std::vector<std::uint64_t>>();
    if (grid.gamma.empty() || grid.alpha.empty() || grid.seeds.empty())
        throw ConfigError("sweep needs nonempty grid.gamma, grid.alpha and grid.seeds");
    for (double v : grid.gamma) {
        bool ok = false;
        for (int i = -3; i <= 0; ++i)
            if (std::abs(v - std::pow(10.0, i)) <= 1e-12 * std::pow(10.0, i)) ok = true;
        if (!ok) throw ConfigError("grid.gamma values must be 10^i for -3 <= i <= 0");
    }
    for (int a : grid.alpha) {
        bool ok = false;
        for (int i = 0; i <= 6; ++i)
            if (a == (1 << i)) ok = true;
        if (!ok) throw ConfigError("grid.alpha values must be 2^i for 0 <= i <= 6");
    }
    return grid;
}

namespace {

std::string format_compact(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string format_full(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

nlohmann::json resolved_config(const std::string& config_path,
                               const std::vector<std::string>& overrides,
                               const std::string& output) {
    nlohmann::json cfg = load_config_file(config_path);
    for (const std::string& kv : overrides) apply_override(cfg, kv);
    if (!output.empty()) cfg["output_dir"] = output;
    return cfg;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& output) {
    const nlohmann::json cfg_json = resolved_config(config_path, overrides, output);
    const ExperimentConfig cfg = parse_experiment_config(cfg_json);
    const RunRecord rec = run_experiment(cfg);
    std::cout << "method: " << method_name(rec.method) << '\n';
    std::cout << "A_f: " << format_compact(final_accuracy(rec.m_test)) << '\n';
    if (rec.method != Method::joint) {
        std::cout << "A_avg: " << format_compact(avg_incremental_accuracy(rec.m_test)) << '\n';
        std::cout << "A_l: " << format_compact(learning_accuracy(rec.m_test)) << '\n';
    }
    if (!cfg.output_dir.empty()) std::cout << "results: " << cfg.output_dir.string() << '\n';
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& output) {
    const nlohmann::json base_json = resolved_config(config_path, overrides, output);
    const GridSpec grid = parse_grid(base_json);
    const std::filesystem::path base_dir = base_json.at("output_dir").get<std::string>();
    if (base_dir.empty()) throw ConfigError("sweep needs a nonempty output_dir");
    std::filesystem::create_directories(base_dir);

    struct Row {
        double gamma;
        int alpha;
        std::uint64_t seed;
        double a_avg_val;
        double a_f_val;
    };
    std::vector<Row> rows;
    std::ofstream failures(base_dir / "failures.log");
    int failed = 0;

    for (double g : grid.gamma) {
        for (int a : grid.alpha) {
            for (std::uint64_t s : grid.seeds) {
                nlohmann::json pt = base_json;
                pt["gamma"] = g;
                pt["alpha"] = a;
                pt["seeds"]["model_init"] = s;
                pt["seeds"]["dropout"] = mix_seed(s, 0x64726f70ULL);
                pt["seeds"]["feature_buffer"] = mix_seed(s, 0x62756666ULL);
                const std::string leaf = "g" + format_compact(g) + "_a" + std::to_string(a) +
                                         "_s" + std::to_string(s);
                pt["output_dir"] = (base_dir / leaf).string();
                try {
                    const ExperimentConfig cfg = parse_experiment_config(pt);
                    const RunRecord rec = run_experiment(cfg);
                    rows.push_back({g, a, s, avg_incremental_accuracy(rec.m_val),
                                    final_accuracy(rec.m_val)});
                } catch (const std::exception& e) {
                    ++failed;
                    failures << leaf << ": " << e.what() << '\n';
                    log_warn("sweep point " + leaf + " failed: " + e.what());
                }
            }
        }
    }

    std::ofstream csv(base_dir / "sweep.csv");
    if (!csv) throw IoError("cannot write " + (base_dir / "sweep.csv").string());
    csv << "gamma,alpha,seed,A_avg_val,A_f_val\n";
    for (const Row& r : rows)
        csv << format_full(r.gamma) << ',' << r.alpha << ',' << r.seed << ','
            << format_full(r.a_avg_val) << ',' << format_full(r.a_f_val) << '\n';

    if (rows.empty()) {
        log_error("all sweep points failed");
        return 1;
    }

    std::map<std::pair<double, int>, std::vector<double>> by_point;
    for (const Row& r : rows) by_point[{r.gamma, r.alpha}].push_back(r.a_avg_val);
    std::pair<double, int> best{};
    double best_mean = -1.0;
    double best_std = 0.0;
    for (const auto& [point, vals] : by_point) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size());
        if (mean > best_mean) {
            best_mean = mean;
            best_std = std::sqrt(var);
            best = point;
        }
    }
    nlohmann::json best_json;
    best_json["gamma"] = best.first;
    best_json["alpha"] = best.second;
    best_json["mean_A_avg_val"] = best_mean;
    best_json["std_A_avg_val"] = best_std;
    {
        std::ofstream out(base_dir / "best.json");
        out << best_json.dump(2) << '\n';
    }
    std::cout << "sweep rows: " << rows.size() << " (failed: " << failed << ")\n";
    std::cout << "best gamma=" << format_compact(best.first) << " alpha=" << best.second
              << " mean A_avg_val=" << format_compact(best_mean) << '\n';
    return 0;
}

int cmd_gen_sbm(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_dir) {
    const nlohmann::json cfg_json = resolved_config(config_path, overrides, "");
    ExperimentConfig cfg = parse_experiment_config(cfg_json);
    if (cfg.dataset.from_files)
        throw ConfigError("gen-sbm needs dataset.source=sbm in the config");
    const RawDataset ds = generate_sbm(cfg.dataset.sbm);
    save_dataset(out_dir, ds);
    std::cout << "nodes: " << ds.num_nodes() << "\nedges: " << ds.edges.size()
              << "\nclasses: " << ds.num_classes() << "\nwrote: " << out_dir << '\n';
    return 0;
}

int cmd_validate_bank(const std::string& dir) {
    const std::filesystem::path d(dir);
    if (!std::filesystem::exists(d / "manifest.json"))
        throw ConfigError("no bank manifest in " + dir);
    bool all_ok = true;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(d))
        if (entry.path().extension() == ".bin") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no matrices in " + dir);

    for (const auto& file : files) {
        const std::string name = file.filename().string();
        try {
            const Mat m = load_matrix(file);
            std::cout << name << ": " << m.rows() << "x" << m.cols();
            const bool is_r = !name.empty() && name[0] == 'r';
            bool ok = m.allFinite();
            if (is_r) {
                const SpectralReport rep = spectral_sanity(m);
                const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
                ok = ok && rep.psd && rep.max_asymmetry <= 1e-8 * scale;
                std::cout << " asymmetry=" << format_compact(rep.max_asymmetry)
                          << " min_pivot=" << format_compact(rep.min_pivot)
                          << " psd=" << (rep.psd ? "yes" : "no");
            }
            std::cout << (ok ? " PASS" : " FAIL") << '\n';
            all_ok = all_ok && ok;
        } catch (const std::exception& e) {
            std::cout << name << ": FAIL (" << e.what() << ")\n";
            all_ok = false;
        }
    }
    return all_ok ? 0 : 1;
}

int cmd_report(const std::string& dir) {
    const std::filesystem::path d(dir);
    std::ifstream in(d / "metrics.json");
    if (!in) throw ConfigError("no metrics.json in " + dir);
    nlohmann::json metrics;
    try {
        in >> metrics;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad metrics.json: " + std::string(e.what()));
    }
    const PerformanceMatrix m = load_performance_csv(d / "m_test.csv");

    std::cout << "performance matrix (rows: after task t; cols: accuracy on task i):\n";
    for (int t = 0; t < m.num_tasks(); ++t) {
        std::cout << "  t" << t << ":";
        for (double a : m.rows[static_cast<std::size_t>(t)])
            std::cout << ' ' << std::fixed << std::setprecision(4) << a;
        std::cout << '\n';
    }
    std::cout.unsetf(std::ios::fixed);
    for (const char* key : {"A_avg", "A_f", "A_l"}) {
        std::cout << key << ": ";
        if (metrics.contains(key) && !metrics[key].is_null())
            std::cout << format_compact(metrics[key].get<double>());
        else
            std::cout << "-";
        std::cout << '\n';
    }
    if (metrics.contains("drift") && !metrics["drift"].is_null())
        std::cout << "drift (normalized, mean over past tasks): "
                  << format_compact(metrics["drift"]["summary_normalized"].get<double>()) << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Continual graph learning with closed-form encoder merging"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    std::string dir;
    std::string out_dir;

    CLI::App* run = app.add_subcommand("run", "Run one experiment from a JSON config");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--override", overrides, "key=value, dotted paths");
    run->add_option("--output", output, "override output_dir");

    CLI::App* sweep = app.add_subcommand("sweep", "Grid search over gamma/alpha/seeds");
    sweep->add_option("--config", config_path, "config file with grid lists")->required();
    sweep->add_option("--override", overrides, "key=value, dotted paths");
    sweep->add_option("--output", output, "override output_dir");

    CLI::App* gen = app.add_subcommand("gen-sbm", "Write a synthetic dataset to disk");
    gen->add_option("--config", config_path, "config file with dataset.sbm")->required();
    gen->add_option("--override", overrides, "key=value, dotted paths");
    gen->add_option("--out", out_dir, "dataset directory")->required();

    CLI::App* validate = app.add_subcommand("validate-bank", "Check a bank checkpoint");
    validate->add_option("--dir", dir, "bank checkpoint directory")->required();

    CLI::App* report = app.add_subcommand("report", "Summarize a results directory");
    report->add_option("--dir", dir, "results directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) return cmd_run(config_path, overrides, output);
        if (sweep->parsed()) return cmd_sweep(config_path, overrides, output);
        if (gen->parsed()) return cmd_gen_sbm(config_path, overrides, out_dir);
        if (validate->parsed()) return cmd_validate_bank(dir);
        if (report->parsed()) return cmd_report(dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace adr
