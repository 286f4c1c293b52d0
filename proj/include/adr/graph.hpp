#pragma once

#include "adr/linalg.hpp"

#include <Eigen/SparseCore>

#include <utility>
#include <vector>

namespace adr {

struct RawDataset;

/// Undirected graph: canonical edge list (src < dst, deduplicated, no self
/// loops) plus CSR neighbor lists expanded symmetrically.
struct SparseGraph {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> row_ptr;
    std::vector<int> col_idx;
};

/// Builds a SparseGraph from a raw pair list: symmetrizes, deduplicates and
/// drops self loops. Throws ShapeError on out-of-range indices.
SparseGraph make_sparse_graph(int num_nodes, const std::vector<std::pair<int, int>>& raw_edges);

/// D^{-1/2} (A + I) D^{-1/2} with D the degree of A + I. Stored CSR; each
/// weight is 1/sqrt(deg(o) * deg(j)), symmetric by construction.
struct NormalizedAdjacency {
    Eigen::SparseMatrix<double, Eigen::RowMajor> weights;

    Eigen::Index num_nodes() const { return weights.rows(); }
};

NormalizedAdjacency normalize(const SparseGraph& g);

/// Row o of the result is sum_j w_oj * H[j]; linear in H.
Mat propagate(const NormalizedAdjacency& adj, const Mat& h);

/// Transpose propagation (gradient path). Equal to propagate for the
/// symmetric weights produced by normalize.
Mat propagate_adjoint(const NormalizedAdjacency& adj, const Mat& g);

enum class Split : unsigned char { train, val, test };

/// One task of the class-incremental stream: nodes of the task's classes,
/// intra-task edges only. Inter-task edges are reintroduced by
/// build_global_test_graph at evaluation time.
struct TaskGraph {
    int task_id = -1;
    Mat features;
    SparseGraph topology;
    NormalizedAdjacency norm_adj;
    std::vector<int> labels;    // global class ids
    std::vector<Split> split;   // per-node partition
    std::vector<int> classes;   // the task's label set
    std::vector<int> orig_ids;  // node ids in the source dataset

    int num_nodes() const { return topology.num_nodes; }
    std::vector<int> nodes_with_split(Split s) const;
};

/// Consolidated evaluation graph over all tasks seen so far. Preserves
/// inter-task edges present in the source dataset; evaluation targets are
/// the union of the per-task test (or val) masks.
struct GlobalTestGraph {
    Mat features;
    SparseGraph topology;
    NormalizedAdjacency norm_adj;
    std::vector<int> labels;
    std::vector<Split> split;
    std::vector<int> task_of_node;
    std::vector<int> orig_ids;

    int num_nodes() const { return topology.num_nodes; }
};

/// Subgraph induced by the nodes whose label is in class_set; edges among
/// them only. Split masks default to train and are reassigned by
/// build_task_stream. Throws ShapeError on unknown class ids.
TaskGraph induce_task_subgraph(const RawDataset& ds, const std::vector<int>& class_set,
                               int task_id);

GlobalTestGraph build_global_test_graph(const RawDataset& ds,
                                        const std::vector<TaskGraph>& tasks_seen);

}  // namespace adr
