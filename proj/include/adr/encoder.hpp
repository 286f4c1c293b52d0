#pragma once

#include "adr/graph.hpp"
#include "adr/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace adr {

/// K-layer GCN (no biases, ReLU) plus a linear classifier over the global
/// label space. Classifier columns are indexed by global class id and grow
/// as new classes arrive.
struct GcnModel {
    std::vector<Mat> layer_weights;
    Mat classifier;
    double dropout_rate = 0.5;
    std::uint64_t init_seed = 0;

    int num_layers() const { return static_cast<int>(layer_weights.size()); }
    Eigen::Index input_dim() const { return layer_weights.front().rows(); }
    Eigen::Index embed_dim() const { return layer_weights.back().cols(); }
    Eigen::Index num_classes() const { return classifier.cols(); }
};

/// layer_dims = [d_in, hidden..., d_out]; weights drawn uniform
/// +-1/sqrt(fan_in), one RNG stream per matrix so layouts do not interact.
GcnModel init_model(const std::vector<int>& layer_dims, int num_classes, double dropout,
                    std::uint64_t seed);

/// Appends zero-initialized classifier columns up to num_classes.
void grow_classifier(GcnModel& model, int num_classes);

/// Every intermediate of one forward pass. Per layer k: agg_input is the
/// propagated input H-hat_k and pre_act is H_k = H-hat_k * W_k (the pair the
/// merging statistics are built from). h_final is the classifier input.
struct TappedForward {
    std::vector<Mat> agg_inputs;
    std::vector<Mat> pre_acts;
    std::vector<Mat> dropout_masks;  // entries 0 or 1/(1-p); empty in eval mode
    Mat h_final;
    Mat logits;
    bool train_mode = false;
};

/// Dropout (train mode only) hits post-activation hidden features, never the
/// raw input; masks are a pure function of dropout_seed so the loss stays
/// differentiable in the weights.
TappedForward forward_tapped(const GcnModel& model, const Mat& x, const NormalizedAdjacency& adj,
                             bool train_mode, std::uint64_t dropout_seed = 0);
TappedForward forward_tapped(const GcnModel& model, const TaskGraph& tg, bool train_mode,
                             std::uint64_t dropout_seed = 0);

/// Mean negative log softmax of the true class over masked nodes, softmax
/// restricted to the class_cols columns (unseen-class columns never enter).
double cross_entropy_loss(const Mat& logits, const std::vector<int>& labels,
                          const std::vector<int>& mask, const std::vector<int>& class_cols);

struct Gradients {
    std::vector<Mat> layer_grads;
    Mat classifier_grad;
};

/// Exact gradients of loss_scale * cross_entropy_loss, including the A-hat
/// transpose path through every propagation. Requires a train-mode tap.
Gradients backward(const GcnModel& model, const NormalizedAdjacency& adj,
                   const TappedForward& tapped, const std::vector<int>& labels,
                   const std::vector<int>& mask, const std::vector<int>& class_cols,
                   double loss_scale = 1.0);

struct AdaptConfig {
    double lr = 1e-3;
    int epochs = 200;
    int batch_size = 2000;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over mini-batches of training nodes (forward over the full task
/// graph, loss over the batch). Only current-task classifier columns move.
GcnModel adapt_task(GcnModel model, const TaskGraph& tg, const AdaptConfig& cfg);

/// Checkpoint: per-matrix binary files plus manifest.json.
void save_model(const std::filesystem::path& dir, const GcnModel& model);
GcnModel load_model(const std::filesystem::path& dir);

}  // namespace adr
