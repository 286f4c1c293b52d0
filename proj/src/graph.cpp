#include "adr/graph.hpp"

#include "adr/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace adr {

SparseGraph make_sparse_graph(int num_nodes, const std::vector<std::pair<int, int>>& raw_edges) {
    if (num_nodes < 0) throw ShapeError("make_sparse_graph: negative node count");
    std::vector<std::pair<int, int>> canon;
    canon.reserve(raw_edges.size());
    for (auto [a, b] : raw_edges) {
        if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes)
            throw ShapeError("make_sparse_graph: edge endpoint " + std::to_string(a) + "," +
                             std::to_string(b) + " out of range for " + std::to_string(num_nodes) +
                             " nodes");
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        canon.emplace_back(a, b);
    }
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

    SparseGraph g;
    g.num_nodes = num_nodes;
    g.edges = std::move(canon);

    std::vector<int> degree(static_cast<std::size_t>(num_nodes), 0);
    for (auto [a, b] : g.edges) {
        ++degree[static_cast<std::size_t>(a)];
        ++degree[static_cast<std::size_t>(b)];
    }
    g.row_ptr.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
    for (int v = 0; v < num_nodes; ++v)
        g.row_ptr[static_cast<std::size_t>(v) + 1] =
            g.row_ptr[static_cast<std::size_t>(v)] + degree[static_cast<std::size_t>(v)];
    g.col_idx.resize(static_cast<std::size_t>(g.row_ptr.back()));
    std::vector<int> cursor(g.row_ptr.begin(), g.row_ptr.end() - 1);
    for (auto [a, b] : g.edges) {
        g.col_idx[static_cast<std::size_t>(cursor[static_cast<std::size_t>(a)]++)] = b;
        g.col_idx[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b)]++)] = a;
    }
    for (int v = 0; v < num_nodes; ++v)
        std::sort(g.col_idx.begin() + g.row_ptr[static_cast<std::size_t>(v)],
                  g.col_idx.begin() + g.row_ptr[static_cast<std::size_t>(v) + 1]);
    return g;
}

NormalizedAdjacency normalize(const SparseGraph& g) {
    const int n = g.num_nodes;
    // Degree of A + I: self loop counts once, each neighbor once.
    std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        const int deg = 1 + g.row_ptr[static_cast<std::size_t>(v) + 1] -
                        g.row_ptr[static_cast<std::size_t>(v)];
        inv_sqrt_deg[static_cast<std::size_t>(v)] = 1.0 / std::sqrt(static_cast<double>(deg));
    }

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(g.col_idx.size() + static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        trips.emplace_back(v, v,
                           inv_sqrt_deg[static_cast<std::size_t>(v)] *
                               inv_sqrt_deg[static_cast<std::size_t>(v)]);
        for (int k = g.row_ptr[static_cast<std::size_t>(v)];
             k < g.row_ptr[static_cast<std::size_t>(v) + 1]; ++k) {
            const int u = g.col_idx[static_cast<std::size_t>(k)];
            trips.emplace_back(v, u,
                               inv_sqrt_deg[static_cast<std::size_t>(v)] *
                                   inv_sqrt_deg[static_cast<std::size_t>(u)]);
        }
    }
    NormalizedAdjacency adj;
    adj.weights.resize(n, n);
    adj.weights.setFromTriplets(trips.begin(), trips.end());
    adj.weights.makeCompressed();
    return adj;
}

Mat propagate(const NormalizedAdjacency& adj, const Mat& h) {
    if (h.rows() != adj.num_nodes())
        throw ShapeError("propagate: feature rows " + std::to_string(h.rows()) +
                         " != node count " + std::to_string(adj.num_nodes()));
    return adj.weights * h;
}

Mat propagate_adjoint(const NormalizedAdjacency& adj, const Mat& g) {
    if (g.rows() != adj.num_nodes())
        throw ShapeError("propagate_adjoint: rows " + std::to_string(g.rows()) +
                         " != node count " + std::to_string(adj.num_nodes()));
    return adj.weights.transpose() * g;
}

std::vector<int> TaskGraph::nodes_with_split(Split s) const {
    std::vector<int> out;
    for (int v = 0; v < num_nodes(); ++v)
        if (split[static_cast<std::size_t>(v)] == s) out.push_back(v);
    return out;
}

namespace {

std::vector<int> select_nodes(const RawDataset& ds, const std::vector<int>& class_set) {
    std::vector<char> wanted(static_cast<std::size_t>(ds.num_classes()), 0);
    for (int c : class_set) {
        if (c < 0 || c >= ds.num_classes())
            throw ShapeError("task class id " + std::to_string(c) + " outside dataset range");
        wanted[static_cast<std::size_t>(c)] = 1;
    }
    std::vector<int> nodes;
    for (int v = 0; v < ds.num_nodes(); ++v)
        if (wanted[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(v)])])
            nodes.push_back(v);
    return nodes;
}

// local id per original node, -1 when absent
std::vector<int> build_local_index(int total, const std::vector<int>& nodes) {
    std::vector<int> local(static_cast<std::size_t>(total), -1);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        local[static_cast<std::size_t>(nodes[i])] = static_cast<int>(i);
    return local;
}

std::vector<std::pair<int, int>> induced_edges(const RawDataset& ds,
                                               const std::vector<int>& local) {
    std::vector<std::pair<int, int>> edges;
    for (auto [a, b] : ds.edges) {
        const int la = local[static_cast<std::size_t>(a)];
        const int lb = local[static_cast<std::size_t>(b)];
        if (la >= 0 && lb >= 0) edges.emplace_back(la, lb);
    }
    return edges;
}

}  // namespace

TaskGraph induce_task_subgraph(const RawDataset& ds, const std::vector<int>& class_set,
                               int task_id) {
    const std::vector<int> nodes = select_nodes(ds, class_set);
    const std::vector<int> local = build_local_index(ds.num_nodes(), nodes);
    const int n = static_cast<int>(nodes.size());

    TaskGraph tg;
    tg.task_id = task_id;
    tg.classes = class_set;
    std::sort(tg.classes.begin(), tg.classes.end());
    tg.orig_ids = nodes;
    tg.features.resize(n, ds.features.cols());
    tg.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        tg.features.row(i) = ds.features.row(nodes[static_cast<std::size_t>(i)]);
        tg.labels[static_cast<std::size_t>(i)] =
            ds.labels[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])];
    }
    tg.split.assign(static_cast<std::size_t>(n), Split::train);
    tg.topology = make_sparse_graph(n, induced_edges(ds, local));
    tg.norm_adj = normalize(tg.topology);
    return tg;
}

GlobalTestGraph build_global_test_graph(const RawDataset& ds,
                                        const std::vector<TaskGraph>& tasks_seen) {
    GlobalTestGraph gg;
    std::vector<int> nodes;
    std::vector<Split> splits;
    std::vector<int> task_of;
    for (const TaskGraph& tg : tasks_seen) {
        for (int i = 0; i < tg.num_nodes(); ++i) {
            nodes.push_back(tg.orig_ids[static_cast<std::size_t>(i)]);
            splits.push_back(tg.split[static_cast<std::size_t>(i)]);
            task_of.push_back(tg.task_id);
        }
    }
    const std::vector<int> local = build_local_index(ds.num_nodes(), nodes);
    const int n = static_cast<int>(nodes.size());

    gg.orig_ids = nodes;
    gg.split = std::move(splits);
    gg.task_of_node = std::move(task_of);
    gg.features.resize(n, ds.features.cols());
    gg.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        gg.features.row(i) = ds.features.row(nodes[static_cast<std::size_t>(i)]);
        gg.labels[static_cast<std::size_t>(i)] =
            ds.labels[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])];
    }
    // Edges among the union, including those that cross task boundaries.
    gg.topology = make_sparse_graph(n, induced_edges(ds, local));
    gg.norm_adj = normalize(gg.topology);
    return gg;
}

}  // namespace adr
