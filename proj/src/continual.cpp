#include "adr/continual.hpp"

#include "adr/log.hpp"
#include "adr/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace adr {

std::string method_name(Method m) {
    switch (m) {
        case Method::adr: return "adr";
        case Method::bare: return "bare";
        case Method::joint: return "joint";
        case Method::frozen_analytic: return "frozen_analytic";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "adr") return Method::adr;
    if (name == "bare") return Method::bare;
    if (name == "joint") return Method::joint;
    if (name == "frozen_analytic") return Method::frozen_analytic;
    throw ShapeError("unknown method: " + name);
}

RawDataset load_config_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset.from_files) return load_dataset(cfg.dataset.path);
    return generate_sbm(cfg.dataset.sbm);
}

namespace {

std::vector<int> model_dims(const ExperimentConfig& cfg, Eigen::Index input_dim) {
    std::vector<int> dims{static_cast<int>(input_dim)};
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    return dims;
}

AdaptConfig adapt_config(const ExperimentConfig& cfg, int task_id) {
    AdaptConfig ac;
    ac.lr = task_id == 0 ? cfg.lr_base : cfg.lr_incremental;
    ac.epochs = cfg.epochs;
    ac.batch_size = cfg.batch_size;
    ac.seed = mix_seed(cfg.seed_dropout, static_cast<std::uint64_t>(task_id));
    return ac;
}

std::vector<int> predict_raw(const GcnModel& model, const Mat& x, const NormalizedAdjacency& adj) {
    const TappedForward tap = forward_tapped(model, x, adj, false);
    std::vector<int> out(static_cast<std::size_t>(tap.logits.rows()));
    for (Eigen::Index v = 0; v < tap.logits.rows(); ++v) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < tap.logits.cols(); ++c)
            if (tap.logits(v, c) > tap.logits(v, best)) best = c;
        out[static_cast<std::size_t>(v)] = static_cast<int>(best);
    }
    return out;
}

std::vector<double> per_task_accuracy(const std::vector<int>& preds, const GlobalTestGraph& gg,
                                      Split split, int tasks_seen) {
    std::vector<int> correct(static_cast<std::size_t>(tasks_seen), 0);
    std::vector<int> total(static_cast<std::size_t>(tasks_seen), 0);
    for (int v = 0; v < gg.num_nodes(); ++v) {
        if (gg.split[static_cast<std::size_t>(v)] != split) continue;
        const auto t = static_cast<std::size_t>(gg.task_of_node[static_cast<std::size_t>(v)]);
        ++total[t];
        if (preds[static_cast<std::size_t>(v)] == gg.labels[static_cast<std::size_t>(v)])
            ++correct[t];
    }
    std::vector<double> acc(static_cast<std::size_t>(tasks_seen));
    for (std::size_t t = 0; t < acc.size(); ++t) {
        if (total[t] == 0)
            throw ShapeError("task " + std::to_string(t) + " has no evaluation nodes for split");
        acc[t] = static_cast<double>(correct[t]) / static_cast<double>(total[t]);
    }
    return acc;
}

struct AcrHead {
    const FeatureBuffer* buffer = nullptr;
    const Mat* w_phi = nullptr;
    const std::vector<int>* seen_classes = nullptr;
};

void fill_row(RunRecord& rec, const GcnModel& model, const AcrHead& head,
              const GlobalTestGraph& gg, int t) {
    const std::vector<int> preds =
        head.buffer ? predict(model, *head.buffer, *head.w_phi, *head.seen_classes, gg.features,
                              gg.norm_adj)
                    : predict_raw(model, gg.features, gg.norm_adj);
    rec.m_test.rows.push_back(per_task_accuracy(preds, gg, Split::test, t + 1));
    rec.m_val.rows.push_back(per_task_accuracy(preds, gg, Split::val, t + 1));
}

void add_model_tensors(std::vector<RetainedTensor>& inv, const std::string& prefix,
                       const GcnModel& model) {
    for (int k = 0; k < model.num_layers(); ++k) {
        const Mat& w = model.layer_weights[static_cast<std::size_t>(k)];
        inv.push_back({prefix + ".w" + std::to_string(k), w.rows(), w.cols()});
    }
    inv.push_back({prefix + ".classifier", model.classifier.rows(), model.classifier.cols()});
}

std::vector<RetainedTensor> inventory_of(const GcnModel* model, const EncoderMemoryBank* eb,
                                         const ClassifierMemoryBank* cb, const FeatureBuffer* buf,
                                         const Mat* w_phi,
                                         const std::vector<GcnModel>* checkpoints) {
    std::vector<RetainedTensor> inv;
    if (model) add_model_tensors(inv, "model", *model);
    if (eb) {
        for (std::size_t k = 0; k < eb->r.size(); ++k) {
            inv.push_back({"encoder_bank.r" + std::to_string(k), eb->r[k].rows(), eb->r[k].cols()});
            inv.push_back({"encoder_bank.q" + std::to_string(k), eb->q[k].rows(), eb->q[k].cols()});
        }
    }
    if (cb) {
        inv.push_back({"classifier_bank.r_phi", cb->r_phi.rows(), cb->r_phi.cols()});
        inv.push_back({"classifier_bank.q_phi", cb->q_phi.rows(), cb->q_phi.cols()});
    }
    if (buf && buf->alpha > 1)
        inv.push_back({"feature_buffer.w_psi", buf->w_psi.rows(), buf->w_psi.cols()});
    if (w_phi) inv.push_back({"reconstructed_classifier", w_phi->rows(), w_phi->cols()});
    if (checkpoints)
        for (std::size_t t = 0; t < checkpoints->size(); ++t)
            add_model_tensors(inv, "drift_checkpoint" + std::to_string(t), (*checkpoints)[t]);
    return inv;
}

std::uint64_t bank_checksum(const EncoderMemoryBank* eb, const ClassifierMemoryBank* cb) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    if (eb) {
        for (const Mat& m : eb->r) h = mix_seed(h, matrix_checksum(m));
        for (const Mat& m : eb->q) h = mix_seed(h, matrix_checksum(m));
    }
    if (cb) {
        h = mix_seed(h, matrix_checksum(cb->r_phi));
        h = mix_seed(h, matrix_checksum(cb->q_phi));
    }
    return h;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Mat gather_rows(const Mat& m, const std::vector<int>& rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

TaskGraph as_task_graph(const GlobalTestGraph& gg, std::vector<int> classes) {
    TaskGraph tg;
    tg.task_id = 0;
    tg.features = gg.features;
    tg.topology = gg.topology;
    tg.norm_adj = gg.norm_adj;
    tg.labels = gg.labels;
    tg.split = gg.split;
    tg.classes = std::move(classes);
    tg.orig_ids = gg.orig_ids;
    return tg;
}

void persist_partial(const ExperimentConfig& cfg, const RunRecord& rec) {
    if (cfg.output_dir.empty()) return;
    persist_record(cfg.output_dir, rec);
}

int stream_length(const RawDataset& ds, const TaskStreamSpec& spec) {
    const int rem = ds.num_classes() - spec.base_classes;
    if (rem < 0 || spec.increment_classes < 1 || rem % spec.increment_classes != 0)
        throw ShapeError("task stream spec does not match dataset class count");
    return 1 + rem / spec.increment_classes;
}

}  // namespace

RunRecord run_adr(const ExperimentConfig& cfg, const RawDataset& ds, const AuditHook& audit) {
    RunRecord rec;
    rec.method = Method::adr;
    rec.config_echo = cfg.echo;
    const int num_tasks = stream_length(ds, cfg.task_stream);

    GcnModel model;
    EncoderMemoryBank bank;
    FeatureBuffer buffer;
    ClassifierMemoryBank cbank;
    Mat w_phi;
    std::vector<GcnModel> drift_checkpoints;
    GcnModel last_merged_model;

    for (int t = 0; t < num_tasks; ++t) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<TaskGraph> prefix = build_task_stream_prefix(ds, cfg.task_stream, t);
        const TaskGraph& tg = prefix[static_cast<std::size_t>(t)];
        rec.rho.push_back(class_skew(tg));

        if (t == 0) {
            model = init_model(model_dims(cfg, ds.features.cols()),
                               *std::max_element(tg.classes.begin(), tg.classes.end()) + 1,
                               cfg.dropout, cfg.seed_model_init);
            bank = make_encoder_bank(model);
        }
        model = adapt_task(std::move(model), tg, adapt_config(cfg, t));
        {
            const std::vector<LayerStats> stats = collect_layer_statistics(model, tg);
            bank = update_bank(std::move(bank), stats);
        }
        const MergedEncoder merged = merge(bank, cfg.gamma, model);
        GcnModel merged_model = apply_merged(model, merged);

        if (t == 0) {
            buffer = make_feature_buffer(merged_model.embed_dim(), cfg.alpha,
                                         cfg.seed_feature_buffer);
            cbank = make_classifier_bank(buffer.out_dim());
        }
        {
            const std::vector<int> train_nodes = tg.nodes_with_split(Split::train);
            const Mat h_m = forward_tapped(merged_model, tg, false).h_final;
            const Mat h_b = expand(buffer, gather_rows(h_m, train_nodes));
            const Mat y = one_hot_targets(tg.labels, train_nodes, tg.classes);
            cbank = update_classifier_bank(std::move(cbank), h_b, y, tg.classes);
        }
        w_phi = reconstruct_classifier(cbank, cfg.gamma);

        {
            const GlobalTestGraph gg = build_global_test_graph(ds, prefix);
            fill_row(rec, merged_model, {&buffer, &w_phi, &cbank.seen_classes}, gg, t);
        }
        rec.bank_checksums.push_back(bank_checksum(&bank, &cbank));
        if (cfg.measure_drift) drift_checkpoints.push_back(merged_model);
        last_merged_model = std::move(merged_model);

        prefix.clear();
        rec.task_seconds.push_back(seconds_since(start));
        persist_partial(cfg, rec);
        log_info("adr task " + std::to_string(t) + " done, A_t row filled");
        if (audit)
            audit(t, inventory_of(&model, &bank, &cbank, &buffer, &w_phi,
                                  cfg.measure_drift ? &drift_checkpoints : nullptr));
    }

    if (cfg.measure_drift) {
        const std::vector<TaskGraph> graphs = build_task_stream(ds, cfg.task_stream);
        rec.drift = measure_drift(drift_checkpoints, graphs);
    }
    rec.final_state.model = std::move(last_merged_model);
    rec.final_state.encoder_bank = std::move(bank);
    rec.final_state.classifier_bank = std::move(cbank);
    rec.final_state.buffer = std::move(buffer);
    rec.final_state.gamma = cfg.gamma;
    rec.final_state.reconstructed_classifier = std::move(w_phi);
    persist_partial(cfg, rec);
    return rec;
}

RunRecord run_bare(const ExperimentConfig& cfg, const RawDataset& ds, const AuditHook& audit) {
    RunRecord rec;
    rec.method = Method::bare;
    rec.config_echo = cfg.echo;
    const int num_tasks = stream_length(ds, cfg.task_stream);

    GcnModel model;
    std::vector<GcnModel> drift_checkpoints;
    for (int t = 0; t < num_tasks; ++t) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<TaskGraph> prefix = build_task_stream_prefix(ds, cfg.task_stream, t);
        const TaskGraph& tg = prefix[static_cast<std::size_t>(t)];
        rec.rho.push_back(class_skew(tg));

        if (t == 0)
            model = init_model(model_dims(cfg, ds.features.cols()),
                               *std::max_element(tg.classes.begin(), tg.classes.end()) + 1,
                               cfg.dropout, cfg.seed_model_init);
        model = adapt_task(std::move(model), tg, adapt_config(cfg, t));

        {
            const GlobalTestGraph gg = build_global_test_graph(ds, prefix);
            fill_row(rec, model, {}, gg, t);
        }
        rec.bank_checksums.push_back(0);
        if (cfg.measure_drift) drift_checkpoints.push_back(model);

        prefix.clear();
        rec.task_seconds.push_back(seconds_since(start));
        persist_partial(cfg, rec);
        log_info("bare task " + std::to_string(t) + " done");
        if (audit)
            audit(t, inventory_of(&model, nullptr, nullptr, nullptr, nullptr,
                                  cfg.measure_drift ? &drift_checkpoints : nullptr));
    }

    if (cfg.measure_drift) {
        const std::vector<TaskGraph> graphs = build_task_stream(ds, cfg.task_stream);
        rec.drift = measure_drift(drift_checkpoints, graphs);
    }
    rec.final_state.model = std::move(model);
    rec.final_state.gamma = cfg.gamma;
    persist_partial(cfg, rec);
    return rec;
}

RunRecord run_joint(const ExperimentConfig& cfg, const RawDataset& ds, const AuditHook& audit) {
    RunRecord rec;
    rec.method = Method::joint;
    rec.config_echo = cfg.echo;
    const int num_tasks = stream_length(ds, cfg.task_stream);
    if (cfg.measure_drift)
        log_warn("joint training has a single checkpoint; drift measurement skipped");

    const auto start = std::chrono::steady_clock::now();
    const std::vector<TaskGraph> stream = build_task_stream(ds, cfg.task_stream);
    std::vector<int> all_classes(static_cast<std::size_t>(ds.num_classes()));
    std::iota(all_classes.begin(), all_classes.end(), 0);

    const TaskGraph joint_tg =
        as_task_graph(build_global_test_graph(ds, stream), std::move(all_classes));
    GcnModel model = init_model(model_dims(cfg, ds.features.cols()), ds.num_classes(), cfg.dropout,
                                cfg.seed_model_init);
    model = adapt_task(std::move(model), joint_tg, adapt_config(cfg, 0));

    for (int t = 0; t < num_tasks; ++t) {
        const std::vector<TaskGraph> prefix(stream.begin(), stream.begin() + t + 1);
        const GlobalTestGraph gg = build_global_test_graph(ds, prefix);
        fill_row(rec, model, {}, gg, t);
        rec.rho.push_back(class_skew(stream[static_cast<std::size_t>(t)]));
        rec.bank_checksums.push_back(0);
        rec.task_seconds.push_back(t == 0 ? seconds_since(start) : 0.0);
        if (audit) audit(t, inventory_of(&model, nullptr, nullptr, nullptr, nullptr, nullptr));
    }
    rec.final_state.model = std::move(model);
    rec.final_state.gamma = cfg.gamma;
    persist_partial(cfg, rec);
    return rec;
}

RunRecord run_frozen_analytic(const ExperimentConfig& cfg, const RawDataset& ds,
                              const AuditHook& audit) {
    RunRecord rec;
    rec.method = Method::frozen_analytic;
    rec.config_echo = cfg.echo;
    const int num_tasks = stream_length(ds, cfg.task_stream);

    GcnModel model;
    FeatureBuffer buffer;
    ClassifierMemoryBank cbank;
    Mat w_phi;
    std::vector<GcnModel> drift_checkpoints;

    for (int t = 0; t < num_tasks; ++t) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<TaskGraph> prefix = build_task_stream_prefix(ds, cfg.task_stream, t);
        const TaskGraph& tg = prefix[static_cast<std::size_t>(t)];
        rec.rho.push_back(class_skew(tg));

        if (t == 0) {
            model = init_model(model_dims(cfg, ds.features.cols()),
                               *std::max_element(tg.classes.begin(), tg.classes.end()) + 1,
                               cfg.dropout, cfg.seed_model_init);
            model = adapt_task(std::move(model), tg, adapt_config(cfg, 0));
            buffer = make_feature_buffer(model.embed_dim(), cfg.alpha, cfg.seed_feature_buffer);
            cbank = make_classifier_bank(buffer.out_dim());
        }

        {
            const std::vector<int> train_nodes = tg.nodes_with_split(Split::train);
            const Mat h = forward_tapped(model, tg, false).h_final;
            const Mat h_b = expand(buffer, gather_rows(h, train_nodes));
            const Mat y = one_hot_targets(tg.labels, train_nodes, tg.classes);
            cbank = update_classifier_bank(std::move(cbank), h_b, y, tg.classes);
        }
        w_phi = reconstruct_classifier(cbank, cfg.gamma);

        {
            const GlobalTestGraph gg = build_global_test_graph(ds, prefix);
            fill_row(rec, model, {&buffer, &w_phi, &cbank.seen_classes}, gg, t);
        }
        rec.bank_checksums.push_back(bank_checksum(nullptr, &cbank));
        if (cfg.measure_drift) drift_checkpoints.push_back(model);

        prefix.clear();
        rec.task_seconds.push_back(seconds_since(start));
        persist_partial(cfg, rec);
        log_info("frozen_analytic task " + std::to_string(t) + " done");
        if (audit)
            audit(t, inventory_of(&model, nullptr, &cbank, &buffer, &w_phi,
                                  cfg.measure_drift ? &drift_checkpoints : nullptr));
    }

    if (cfg.measure_drift) {
        const std::vector<TaskGraph> graphs = build_task_stream(ds, cfg.task_stream);
        rec.drift = measure_drift(drift_checkpoints, graphs);
    }
    rec.final_state.model = std::move(model);
    rec.final_state.classifier_bank = std::move(cbank);
    rec.final_state.buffer = std::move(buffer);
    rec.final_state.gamma = cfg.gamma;
    rec.final_state.reconstructed_classifier = std::move(w_phi);
    persist_partial(cfg, rec);
    return rec;
}

RunRecord run_experiment(const ExperimentConfig& cfg, const AuditHook& audit) {
    const RawDataset ds = load_config_dataset(cfg);
    RunRecord rec;
    switch (cfg.method) {
        case Method::adr: rec = run_adr(cfg, ds, audit); break;
        case Method::bare: rec = run_bare(cfg, ds, audit); break;
        case Method::joint: rec = run_joint(cfg, ds, audit); break;
        case Method::frozen_analytic: rec = run_frozen_analytic(cfg, ds, audit); break;
    }
    if (!cfg.output_dir.empty()) persist_checkpoints(cfg.output_dir, rec);
    return rec;
}

void persist_record(const std::filesystem::path& dir, const RunRecord& record) {
    std::filesystem::create_directories(dir);

    const nlohmann::json metrics =
        metrics_json(record.m_test, record.m_val, record.rho,
                     record.drift ? &*record.drift : nullptr, record.method == Method::joint);
    {
        std::ofstream out(dir / "metrics.json");
        if (!out) throw IoError("cannot write " + (dir / "metrics.json").string());
        out << metrics.dump(2) << '\n';
    }
    save_performance_csv(dir / "m_test.csv", record.m_test);
    save_performance_csv(dir / "m_val.csv", record.m_val);

    nlohmann::json rr;
    rr["method"] = method_name(record.method);
    rr["config"] = record.config_echo;
    rr["bank_checksums"] = record.bank_checksums;
    rr["tasks_completed"] = record.m_test.rows.size();
    {
        std::ofstream out(dir / "run_record.json");
        if (!out) throw IoError("cannot write " + (dir / "run_record.json").string());
        out << rr.dump(2) << '\n';
    }

    nlohmann::json timings;
    timings["task_seconds"] = record.task_seconds;
    timings["total_seconds"] =
        std::accumulate(record.task_seconds.begin(), record.task_seconds.end(), 0.0);
    {
        std::ofstream out(dir / "timings.json");
        if (!out) throw IoError("cannot write " + (dir / "timings.json").string());
        out << timings.dump(2) << '\n';
    }
}

void persist_checkpoints(const std::filesystem::path& dir, const RunRecord& record) {
    const std::filesystem::path ck = dir / "checkpoints";
    std::filesystem::create_directories(ck);
    save_model(ck / "model", record.final_state.model);
    if (record.final_state.encoder_bank)
        save_bank(ck / "encoder_bank", *record.final_state.encoder_bank, record.final_state.gamma);
    if (record.final_state.classifier_bank && record.final_state.buffer)
        save_classifier_bank(ck / "classifier_bank", *record.final_state.classifier_bank,
                             *record.final_state.buffer);
    if (record.final_state.reconstructed_classifier)
        save_matrix(ck / "reconstructed_classifier.bin",
                    *record.final_state.reconstructed_classifier);
}

}  // namespace adr
