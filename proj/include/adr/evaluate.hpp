#pragma once

#include "adr/encoder.hpp"
#include "adr/graph.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace adr {

/// Lower-triangular: rows[t][i] = accuracy on task i after training task t.
struct PerformanceMatrix {
    std::vector<std::vector<double>> rows;

    int num_tasks() const { return static_cast<int>(rows.size()); }
};

void validate_performance_matrix(const PerformanceMatrix& m);

/// Mean over t of the running average accuracy after task t.
double avg_incremental_accuracy(const PerformanceMatrix& m);

/// Mean of the last row: accuracy over all tasks at the end of the stream.
double final_accuracy(const PerformanceMatrix& m);

/// Mean diagonal: how well each task is learned when it arrives.
double learning_accuracy(const PerformanceMatrix& m);

/// Max/min training-node count over the task's classes. Throws when a class
/// has no training nodes.
double class_skew(const TaskGraph& task);

struct DriftEntry {
    int task = 0;        // i: which task graph is probed
    int checkpoint = 0;  // t >= i: which encoder snapshot produced embeddings
    double mean_l2 = 0.0;
    double normalized = 0.0;
};

/// How far encoder snapshots move away from the embeddings they produced
/// when each task was current. summary_normalized averages the strict t > i
/// pairs; zero when there is at most one checkpoint.
struct DriftReport {
    std::vector<DriftEntry> entries;
    double summary_normalized = 0.0;
};

/// checkpoints[t] is the encoder in effect after task t; task_graphs[i] the
/// graphs they are probed on. Sizes must match.
DriftReport measure_drift(const std::vector<GcnModel>& checkpoints,
                          const std::vector<TaskGraph>& task_graphs);

/// {A_avg, A_f, A_l, per_task_A_t, rho_t, val{A_avg, A_f}, drift?}. With
/// final_only (the joint-training convention) A_avg, A_l and per_task_A_t
/// are null.
nlohmann::json metrics_json(const PerformanceMatrix& m_test, const PerformanceMatrix& m_val,
                            const std::vector<double>& rho, const DriftReport* drift,
                            bool final_only);

/// CSV with row/col headers t0..tN-1; blank cells above the diagonal.
void save_performance_csv(const std::filesystem::path& file, const PerformanceMatrix& m);
PerformanceMatrix load_performance_csv(const std::filesystem::path& file);

}  // namespace adr
