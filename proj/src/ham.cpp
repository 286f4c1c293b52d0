#include "adr/ham.hpp"

#include <json.hpp>

#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace adr {

EncoderMemoryBank make_encoder_bank(const GcnModel& template_model) {
    EncoderMemoryBank bank;
    for (const Mat& w : template_model.layer_weights) {
        bank.r.push_back(Mat::Zero(w.rows(), w.rows()));
        bank.q.push_back(Mat::Zero(w.rows(), w.cols()));
    }
    return bank;
}

std::vector<LayerStats> collect_layer_statistics(const GcnModel& trained_model,
                                                 const TaskGraph& tg) {
    TappedForward tap = forward_tapped(trained_model, tg, false);
    std::vector<LayerStats> stats;
    stats.reserve(tap.agg_inputs.size());
    for (std::size_t k = 0; k < tap.agg_inputs.size(); ++k)
        stats.push_back({std::move(tap.agg_inputs[k]), std::move(tap.pre_acts[k])});
    return stats;
}

EncoderMemoryBank update_bank(EncoderMemoryBank bank, const std::vector<LayerStats>& stats) {
    if (stats.size() != bank.r.size())
        throw ShapeError("update_bank: " + std::to_string(stats.size()) + " layer stats for " +
                         std::to_string(bank.r.size()) + " bank layers");
    for (std::size_t k = 0; k < stats.size(); ++k) {
        if (stats[k].agg_input.cols() != bank.r[k].rows() ||
            stats[k].pre_act.cols() != bank.q[k].cols())
            throw ShapeError("update_bank: layer " + std::to_string(k) +
                             " stats dims disagree with bank (architecture change mid-stream)");
        bank.r[k] = gram_accumulate(bank.r[k], stats[k].agg_input);
        bank.q[k] = cross_accumulate(bank.q[k], stats[k].agg_input, stats[k].pre_act);
    }
    ++bank.task_count;
    return bank;
}

MergedEncoder merge(const EncoderMemoryBank& bank, double gamma, const GcnModel& template_model) {
    if (bank.empty()) throw ShapeError("merge: empty bank");
    if (bank.r.size() != static_cast<std::size_t>(template_model.num_layers()))
        throw ShapeError("merge: bank layer count disagrees with template model");
    MergedEncoder merged;
    merged.gamma = gamma;
    merged.task_count = bank.task_count;
    for (std::size_t k = 0; k < bank.r.size(); ++k)
        merged.layer_weights.push_back(ridge_solve(RidgeProblem(bank.r[k], bank.q[k], gamma)));
    return merged;
}

GcnModel apply_merged(const GcnModel& template_model, const MergedEncoder& merged) {
    GcnModel out = template_model;
    if (merged.layer_weights.size() != out.layer_weights.size())
        throw ShapeError("apply_merged: layer count mismatch");
    for (std::size_t k = 0; k < out.layer_weights.size(); ++k) {
        if (merged.layer_weights[k].rows() != out.layer_weights[k].rows() ||
            merged.layer_weights[k].cols() != out.layer_weights[k].cols())
            throw ShapeError("apply_merged: layer " + std::to_string(k) + " dims mismatch");
        out.layer_weights[k] = merged.layer_weights[k];
    }
    return out;
}

void save_bank(const std::filesystem::path& dir, const EncoderMemoryBank& bank, double gamma) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["layers"] = bank.r.size();
    manifest["task_count"] = bank.task_count;
    manifest["gamma"] = gamma;
    std::vector<std::vector<long long>> dims;
    for (const Mat& q : bank.q)
        dims.push_back({static_cast<long long>(q.rows()), static_cast<long long>(q.cols())});
    manifest["layer_dims"] = dims;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';

    for (std::size_t k = 0; k < bank.r.size(); ++k) {
        save_matrix(dir / ("r" + std::to_string(k) + ".bin"), bank.r[k]);
        save_matrix(dir / ("q" + std::to_string(k) + ".bin"), bank.q[k]);
    }
}

EncoderMemoryBank load_bank(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad bank manifest: " + std::string(e.what()));
    }
    EncoderMemoryBank bank;
    bank.task_count = manifest.at("task_count").get<int>();
    const auto layers = manifest.at("layers").get<std::size_t>();
    for (std::size_t k = 0; k < layers; ++k) {
        bank.r.push_back(load_matrix(dir / ("r" + std::to_string(k) + ".bin")));
        bank.q.push_back(load_matrix(dir / ("q" + std::to_string(k) + ".bin")));
        if (bank.r[k].rows() != bank.r[k].cols() || bank.r[k].rows() != bank.q[k].rows())
            throw IoError("bank layer " + std::to_string(k) + " has inconsistent dims");
    }
    return bank;
}

}  // namespace adr
