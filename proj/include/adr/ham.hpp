#pragma once

#include "adr/encoder.hpp"
#include "adr/graph.hpp"
#include "adr/linalg.hpp"

#include <filesystem>
#include <vector>

namespace adr {

/// One layer's regression pair from a single task: propagated input and the
/// pre-activation output it was mapped to.
struct LayerStats {
    Mat agg_input;
    Mat pre_act;
};

/// Per-layer Gram accumulators replacing the raw (agg_input, pre_act) pairs
/// of every task seen so far: r[k] = sum of agg^T agg, q[k] = sum of
/// agg^T pre_act. Sizes depend only on the architecture, never on how many
/// tasks or nodes went in.
struct EncoderMemoryBank {
    std::vector<Mat> r;
    std::vector<Mat> q;
    int task_count = 0;

    bool empty() const { return task_count == 0; }
};

EncoderMemoryBank make_encoder_bank(const GcnModel& template_model);

/// One eval-mode forward of the task encoder on its own task graph; every
/// node of the graph contributes a row.
std::vector<LayerStats> collect_layer_statistics(const GcnModel& trained_model,
                                                 const TaskGraph& tg);

EncoderMemoryBank update_bank(EncoderMemoryBank bank, const std::vector<LayerStats>& stats);

struct MergedEncoder {
    std::vector<Mat> layer_weights;
    double gamma = 0.0;
    int task_count = 0;
};

/// Per-layer ridge solve over the bank: the closed-form consolidation of all
/// task encoders seen so far.
MergedEncoder merge(const EncoderMemoryBank& bank, double gamma, const GcnModel& template_model);

/// Template model with its layer weights replaced by the merged ones
/// (classifier and dropout settings carried over unchanged).
GcnModel apply_merged(const GcnModel& template_model, const MergedEncoder& merged);

void save_bank(const std::filesystem::path& dir, const EncoderMemoryBank& bank, double gamma);
EncoderMemoryBank load_bank(const std::filesystem::path& dir);

}  // namespace adr
