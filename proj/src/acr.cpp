#include "adr/acr.hpp"

#include "adr/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <utility>

namespace adr {

FeatureBuffer make_feature_buffer(Eigen::Index embed_dim, int alpha, std::uint64_t seed) {
    if (embed_dim < 1) throw ShapeError("make_feature_buffer: nonpositive embedding dim");
    if (alpha < 1) throw ShapeError("make_feature_buffer: alpha must be >= 1");
    FeatureBuffer buf;
    buf.alpha = alpha;
    buf.seed = seed;
    buf.in_dim = embed_dim;
    if (alpha > 1) {
        Rng rng(mix_seed(seed, 0x627566ULL));
        const double sd = 1.0 / std::sqrt(static_cast<double>(embed_dim));
        buf.w_psi.resize(embed_dim, embed_dim * alpha);
        for (Eigen::Index i = 0; i < buf.w_psi.rows(); ++i)
            for (Eigen::Index j = 0; j < buf.w_psi.cols(); ++j)
                buf.w_psi(i, j) = sd * rng.normal();
    }
    return buf;
}

Mat expand(const FeatureBuffer& buffer, const Mat& h_m) {
    if (h_m.cols() != buffer.in_dim)
        throw ShapeError("expand: " + std::to_string(h_m.cols()) + " columns for buffer of " +
                         std::to_string(buffer.in_dim));
    if (buffer.alpha == 1) return h_m;
    return (h_m * buffer.w_psi).cwiseMax(0.0);
}

ClassifierMemoryBank make_classifier_bank(Eigen::Index expanded_dim) {
    ClassifierMemoryBank bank;
    bank.r_phi = Mat::Zero(expanded_dim, expanded_dim);
    bank.q_phi.resize(expanded_dim, 0);
    return bank;
}

Mat one_hot_targets(const std::vector<int>& labels, const std::vector<int>& rows,
                    const std::vector<int>& class_set) {
    Mat y = Mat::Zero(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(class_set.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int label = labels[static_cast<std::size_t>(rows[i])];
        const auto it = std::find(class_set.begin(), class_set.end(), label);
        if (it == class_set.end())
            throw ShapeError("one_hot_targets: label " + std::to_string(label) +
                             " not in class set");
        y(static_cast<Eigen::Index>(i), it - class_set.begin()) = 1.0;
    }
    return y;
}

ClassifierMemoryBank update_classifier_bank(ClassifierMemoryBank bank, const Mat& h_b,
                                            const Mat& y_onehot,
                                            const std::vector<int>& new_classes) {
    if (h_b.cols() != bank.r_phi.rows())
        throw ShapeError("update_classifier_bank: expanded dim mismatch");
    if (h_b.rows() != y_onehot.rows())
        throw ShapeError("update_classifier_bank: row count mismatch between features and targets");
    if (y_onehot.cols() != static_cast<Eigen::Index>(new_classes.size()))
        throw ShapeError("update_classifier_bank: target columns != new class count");
    for (int c : new_classes)
        if (std::find(bank.seen_classes.begin(), bank.seen_classes.end(), c) !=
            bank.seen_classes.end())
            throw ShapeError("update_classifier_bank: class " + std::to_string(c) +
                             " already seen (task label spaces must be disjoint)");

    bank.r_phi = gram_accumulate(bank.r_phi, h_b);
    const Eigen::Index old_cols = bank.q_phi.cols();
    bank.q_phi.conservativeResize(Eigen::NoChange, old_cols + y_onehot.cols());
    // Old-class columns get no contribution from this task: labels are disjoint.
    bank.q_phi.rightCols(y_onehot.cols()) = h_b.transpose() * y_onehot;
    bank.seen_classes.insert(bank.seen_classes.end(), new_classes.begin(), new_classes.end());
    return bank;
}

Mat reconstruct_classifier(const ClassifierMemoryBank& bank, double gamma) {
    if (bank.empty()) throw ShapeError("reconstruct_classifier: empty bank");
    return ridge_solve(RidgeProblem(bank.r_phi, bank.q_phi, gamma));
}

std::vector<int> predict(const GcnModel& encoder, const FeatureBuffer& buffer, const Mat& w_phi,
                         const std::vector<int>& seen_classes, const Mat& x,
                         const NormalizedAdjacency& adj) {
    if (w_phi.cols() != static_cast<Eigen::Index>(seen_classes.size()))
        throw ShapeError("predict: classifier columns != seen class count");
    const TappedForward tap = forward_tapped(encoder, x, adj, false);
    const Mat scores = expand(buffer, tap.h_final) * w_phi;

    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index v = 0; v < scores.rows(); ++v) {
        double best = scores(v, 0);
        int best_class = seen_classes[0];
        for (Eigen::Index j = 1; j < scores.cols(); ++j) {
            const int cls = seen_classes[static_cast<std::size_t>(j)];
            if (scores(v, j) > best || (scores(v, j) == best && cls < best_class)) {
                best = scores(v, j);
                best_class = cls;
            }
        }
        out[static_cast<std::size_t>(v)] = best_class;
    }
    return out;
}

void save_classifier_bank(const std::filesystem::path& dir, const ClassifierMemoryBank& bank,
                          const FeatureBuffer& buffer) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["alpha"] = buffer.alpha;
    manifest["w_psi_seed"] = buffer.seed;
    manifest["embed_dim"] = static_cast<long long>(buffer.in_dim);
    manifest["seen_classes"] = bank.seen_classes;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
    save_matrix(dir / "r_phi.bin", bank.r_phi);
    save_matrix(dir / "q_phi.bin", bank.q_phi);
}

std::pair<ClassifierMemoryBank, FeatureBuffer> load_classifier_bank(
    const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad classifier bank manifest: " + std::string(e.what()));
    }
    FeatureBuffer buffer =
        make_feature_buffer(manifest.at("embed_dim").get<long long>(),
                            manifest.at("alpha").get<int>(),
                            manifest.at("w_psi_seed").get<std::uint64_t>());
    ClassifierMemoryBank bank;
    bank.seen_classes = manifest.at("seen_classes").get<std::vector<int>>();
    bank.r_phi = load_matrix(dir / "r_phi.bin");
    bank.q_phi = load_matrix(dir / "q_phi.bin");
    if (bank.r_phi.rows() != buffer.out_dim() ||
        bank.q_phi.cols() != static_cast<Eigen::Index>(bank.seen_classes.size()))
        throw IoError("classifier bank dims disagree with manifest");
    return {std::move(bank), std::move(buffer)};
}

}  // namespace adr
