#pragma once

#include "adr/encoder.hpp"
#include "adr/graph.hpp"
#include "adr/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace adr {

/// Frozen random projection + ReLU widening embeddings alpha-fold. Created
/// once at the start of a stream and never touched again; alpha == 1 means
/// the buffer is an identity pass-through.
struct FeatureBuffer {
    Mat w_psi;
    int alpha = 1;
    std::uint64_t seed = 0;
    Eigen::Index in_dim = 0;

    Eigen::Index out_dim() const { return alpha == 1 ? in_dim : w_psi.cols(); }
};

FeatureBuffer make_feature_buffer(Eigen::Index embed_dim, int alpha, std::uint64_t seed);

Mat expand(const FeatureBuffer& buffer, const Mat& h_m);

/// Gram accumulators for the classifier solve: r_phi is fixed-size, q_phi
/// gains one column per class ever seen.
struct ClassifierMemoryBank {
    Mat r_phi;
    Mat q_phi;
    std::vector<int> seen_classes;

    bool empty() const { return seen_classes.empty(); }
};

ClassifierMemoryBank make_classifier_bank(Eigen::Index expanded_dim);

/// rows.size() x class_set.size() one-hot targets; column order follows
/// class_set. Throws when a row's label is not in class_set.
Mat one_hot_targets(const std::vector<int>& labels, const std::vector<int>& rows,
                    const std::vector<int>& class_set);

/// y_onehot columns correspond to new_classes, which must be disjoint from
/// everything seen before; q_phi is zero-extended for them first.
ClassifierMemoryBank update_classifier_bank(ClassifierMemoryBank bank, const Mat& h_b,
                                            const Mat& y_onehot,
                                            const std::vector<int>& new_classes);

/// Closed-form classifier over everything accumulated so far; column order
/// matches bank.seen_classes.
Mat reconstruct_classifier(const ClassifierMemoryBank& bank, double gamma);

/// Eval forward through the encoder, buffer expansion, linear classifier,
/// argmax; ties go to the lowest class id.
std::vector<int> predict(const GcnModel& encoder, const FeatureBuffer& buffer, const Mat& w_phi,
                         const std::vector<int>& seen_classes, const Mat& x,
                         const NormalizedAdjacency& adj);

void save_classifier_bank(const std::filesystem::path& dir, const ClassifierMemoryBank& bank,
                          const FeatureBuffer& buffer);
/// Returns the bank and rebuilds the buffer from its recorded seed.
std::pair<ClassifierMemoryBank, FeatureBuffer> load_classifier_bank(
    const std::filesystem::path& dir);

}  // namespace adr
