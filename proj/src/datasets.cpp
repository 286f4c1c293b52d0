#include "adr/datasets.hpp"

#include "adr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>

namespace adr {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    // Ignore a trailing blank line from a final LF.
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

[[noreturn]] void parse_fail(const std::string& file, std::size_t line_no, const std::string& what) {
    throw ParseError(file + " line " + std::to_string(line_no + 1) + ": " + what);
}

std::vector<double> parse_row(const std::string& file, std::size_t line_no,
                              const std::string& line) {
    std::istringstream iss(line);
    std::vector<double> vals;
    double v = 0.0;
    while (iss >> v) vals.push_back(v);
    if (!iss.eof()) parse_fail(file, line_no, "not a number near '" + line + "'");
    return vals;
}

std::vector<long long> parse_ints(const std::string& file, std::size_t line_no,
                                  const std::string& line) {
    std::istringstream iss(line);
    std::vector<long long> vals;
    long long v = 0;
    while (iss >> v) vals.push_back(v);
    if (!iss.eof()) parse_fail(file, line_no, "not an integer near '" + line + "'");
    return vals;
}

}  // namespace

RawDataset load_dataset(const std::filesystem::path& dir) {
    RawDataset ds;

    const auto feat_lines = read_lines(dir / "features.tsv");
    if (feat_lines.empty()) throw ParseError("features.tsv: empty");
    const std::size_t n = feat_lines.size();
    std::size_t d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = parse_row("features.tsv", i, feat_lines[i]);
        if (i == 0) {
            d = row.size();
            if (d == 0) parse_fail("features.tsv", i, "empty row");
            ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        } else if (row.size() != d) {
            parse_fail("features.tsv", i,
                       "expected " + std::to_string(d) + " fields, got " +
                           std::to_string(row.size()));
        }
        for (std::size_t j = 0; j < d; ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    if (!ds.features.allFinite()) throw ParseError("features.tsv: non-finite value");

    const auto label_lines = read_lines(dir / "labels.tsv");
    if (label_lines.size() != n)
        throw ParseError("labels.tsv: " + std::to_string(label_lines.size()) + " labels for " +
                         std::to_string(n) + " feature rows");
    ds.labels.resize(n);
    long long max_label = -1;
    for (std::size_t i = 0; i < n; ++i) {
        const auto vals = parse_ints("labels.tsv", i, label_lines[i]);
        if (vals.size() != 1) parse_fail("labels.tsv", i, "expected one integer");
        if (vals[0] < 0) parse_fail("labels.tsv", i, "label out of range: " + std::to_string(vals[0]));
        ds.labels[i] = static_cast<int>(vals[0]);
        max_label = std::max(max_label, vals[0]);
    }
    ds.class_count = static_cast<int>(max_label + 1);

    std::vector<std::pair<int, int>> raw_edges;
    const auto edge_lines = read_lines(dir / "edges.tsv");
    for (std::size_t i = 0; i < edge_lines.size(); ++i) {
        if (edge_lines[i].empty()) continue;
        const auto vals = parse_ints("edges.tsv", i, edge_lines[i]);
        if (vals.size() != 2) parse_fail("edges.tsv", i, "expected two integers");
        if (vals[0] < 0 || vals[1] < 0 || vals[0] >= static_cast<long long>(n) ||
            vals[1] >= static_cast<long long>(n))
            parse_fail("edges.tsv", i,
                       "node index out of range: " + std::to_string(vals[0]) + " " +
                           std::to_string(vals[1]));
        raw_edges.emplace_back(static_cast<int>(vals[0]), static_cast<int>(vals[1]));
    }
    // Reuse graph canonicalization for symmetrize + dedup.
    ds.edges = make_sparse_graph(static_cast<int>(n), raw_edges).edges;
    return ds;
}

void save_dataset(const std::filesystem::path& dir, const RawDataset& ds) {
    std::filesystem::create_directories(dir);

    std::ofstream feat(dir / "features.tsv");
    if (!feat) throw IoError("cannot write " + (dir / "features.tsv").string());
    feat << std::setprecision(17);
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
            if (j) feat << '\t';
            feat << ds.features(i, j);
        }
        feat << '\n';
    }

    std::ofstream lab(dir / "labels.tsv");
    if (!lab) throw IoError("cannot write " + (dir / "labels.tsv").string());
    for (int l : ds.labels) lab << l << '\n';

    std::ofstream edg(dir / "edges.tsv");
    if (!edg) throw IoError("cannot write " + (dir / "edges.tsv").string());
    for (auto [a, b] : ds.edges) edg << a << '\t' << b << '\n';

    if (!feat || !lab || !edg) throw IoError("write failure in " + dir.string());
}

RawDataset generate_sbm(const SbmSpec& spec) {
    for (int b : spec.blocks)
        if (b < 1) throw ShapeError("generate_sbm: block size must be >= 1");
    if (spec.p_intra < 0 || spec.p_intra > 1 || spec.p_inter < 0 || spec.p_inter > 1)
        throw ShapeError("generate_sbm: edge probability outside [0,1]");
    if (spec.feature_dim < 1) throw ShapeError("generate_sbm: feature_dim must be >= 1");

    RawDataset ds;
    ds.class_count = static_cast<int>(spec.blocks.size());
    const int n = std::accumulate(spec.blocks.begin(), spec.blocks.end(), 0);
    ds.labels.reserve(static_cast<std::size_t>(n));
    for (int c = 0; c < ds.class_count; ++c)
        ds.labels.insert(ds.labels.end(), static_cast<std::size_t>(spec.blocks[static_cast<std::size_t>(c)]), c);

    Rng rng(spec.seed);
    const int d = spec.feature_dim;
    ds.features.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const int hot = ds.labels[static_cast<std::size_t>(i)] % d;
        for (int j = 0; j < d; ++j)
            ds.features(i, j) = rng.normal() + (j == hot ? spec.feature_shift : 0.0);
    }

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const bool same =
                ds.labels[static_cast<std::size_t>(i)] == ds.labels[static_cast<std::size_t>(j)];
            const double p = same ? spec.p_intra : spec.p_inter;
            if (rng.uniform() < p) ds.edges.emplace_back(i, j);
        }
    }
    return ds;
}

int ceil_frac(double r, int n) {
    if (n <= 0) return 0;
    return static_cast<int>(std::ceil(r * n - 1e-9));
}

namespace {

void assign_splits(TaskGraph& tg, const TaskStreamSpec& spec) {
    for (int c : tg.classes) {
        std::vector<int> members;
        for (int v = 0; v < tg.num_nodes(); ++v)
            if (tg.labels[static_cast<std::size_t>(v)] == c) members.push_back(v);
        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(c) + 1));
        rng.shuffle(members);
        const int n = static_cast<int>(members.size());
        const int n_train = ceil_frac(spec.split_ratio[0], n);
        const int n_val = std::min(ceil_frac(spec.split_ratio[1], n), n - n_train);
        for (int i = 0; i < n; ++i) {
            Split s = Split::test;
            if (i < n_train)
                s = Split::train;
            else if (i < n_train + n_val)
                s = Split::val;
            tg.split[static_cast<std::size_t>(members[static_cast<std::size_t>(i)])] = s;
        }
    }
}

}  // namespace

std::vector<TaskGraph> build_task_stream_prefix(const RawDataset& ds, const TaskStreamSpec& spec,
                                                int last) {
    if (spec.base_classes < 1 || spec.increment_classes < 1)
        throw ShapeError("build_task_stream: class counts must be >= 1");
    const int c_total = ds.num_classes();
    const int rem = c_total - spec.base_classes;
    if (rem < 0 || rem % spec.increment_classes != 0)
        throw ShapeError("build_task_stream: " + std::to_string(c_total) +
                         " classes do not decompose as " + std::to_string(spec.base_classes) +
                         " + k*" + std::to_string(spec.increment_classes));
    double ratio_sum = 0.0;
    for (double r : spec.split_ratio) {
        if (r <= 0.0) throw ShapeError("build_task_stream: split ratios must be positive");
        ratio_sum += r;
    }
    if (std::abs(ratio_sum - 1.0) > 1e-9)
        throw ShapeError("build_task_stream: split ratios must sum to 1");

    std::vector<int> class_order(static_cast<std::size_t>(c_total));
    std::iota(class_order.begin(), class_order.end(), 0);
    if (spec.shuffle_classes) {
        Rng rng(mix_seed(spec.seed, 0));
        rng.shuffle(class_order);
    }

    const int num_tasks = 1 + rem / spec.increment_classes;
    if (last < 0 || last >= num_tasks)
        throw ShapeError("build_task_stream: task " + std::to_string(last) + " outside stream of " +
                         std::to_string(num_tasks));
    std::vector<TaskGraph> tasks;
    tasks.reserve(static_cast<std::size_t>(last) + 1);
    std::size_t next = 0;
    for (int t = 0; t <= last; ++t) {
        const int take = t == 0 ? spec.base_classes : spec.increment_classes;
        std::vector<int> cs(class_order.begin() + static_cast<std::ptrdiff_t>(next),
                            class_order.begin() +
                                static_cast<std::ptrdiff_t>(next + static_cast<std::size_t>(take)));
        next += static_cast<std::size_t>(take);
        TaskGraph tg = induce_task_subgraph(ds, cs, t);
        assign_splits(tg, spec);
        tasks.push_back(std::move(tg));
    }
    return tasks;
}

std::vector<TaskGraph> build_task_stream(const RawDataset& ds, const TaskStreamSpec& spec) {
    const int rem = ds.num_classes() - spec.base_classes;
    const int num_tasks =
        spec.increment_classes >= 1 && rem >= 0 && rem % spec.increment_classes == 0
            ? 1 + rem / spec.increment_classes
            : 1;  // let the prefix builder raise the precise error
    return build_task_stream_prefix(ds, spec, num_tasks - 1);
}

}  // namespace adr
