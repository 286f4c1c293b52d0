#pragma once

#include "adr/graph.hpp"
#include "adr/linalg.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

namespace adr {

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Node-classification dataset: node features, global class ids and an
/// undirected edge list (canonical: src < dst, deduplicated).
struct RawDataset {
    Mat features;
    std::vector<int> labels;
    std::vector<std::pair<int, int>> edges;
    int class_count = 0;

    int num_nodes() const { return static_cast<int>(features.rows()); }
    int num_classes() const { return class_count; }
};

/// Class-incremental schedule: task 0 takes base_classes classes, every
/// later task takes increment_classes more, in ascending label order unless
/// shuffle_classes is set.
struct TaskStreamSpec {
    int base_classes = 2;
    int increment_classes = 2;
    std::array<double, 3> split_ratio{0.6, 0.2, 0.2};  // train, val, test
    std::uint64_t seed = 0;
    bool shuffle_classes = false;
};

/// Stochastic block model with class-conditional Gaussian features
/// (mean = feature_shift along the class's one-hot direction, unit variance).
struct SbmSpec {
    std::vector<int> blocks;  // node count per class
    double p_intra = 0.1;
    double p_inter = 0.01;
    int feature_dim = 16;
    double feature_shift = 1.0;
    std::uint64_t seed = 0;
};

/// Reads features.tsv / labels.tsv / edges.tsv from dir. Throws ParseError
/// (with file and line number) on ragged rows, negative labels, or edge
/// endpoints outside the node range; IoError when a file is missing.
RawDataset load_dataset(const std::filesystem::path& dir);

/// Writes the same three-file format load_dataset reads; round-trips exactly.
void save_dataset(const std::filesystem::path& dir, const RawDataset& ds);

RawDataset generate_sbm(const SbmSpec& spec);

/// Splits classes into tasks per spec and assigns per-class train/val/test
/// masks by seeded shuffle. Throws ShapeError when the class arithmetic or
/// ratios are inconsistent.
std::vector<TaskGraph> build_task_stream(const RawDataset& ds, const TaskStreamSpec& spec);

/// Tasks 0..last only. Masks are seeded per class, so a prefix is identical
/// to the same tasks of the full stream; lets callers drop task graphs after
/// use and rebuild them on demand.
std::vector<TaskGraph> build_task_stream_prefix(const RawDataset& ds, const TaskStreamSpec& spec,
                                                int last);

/// ceil(r * n) guarded against cases like 0.2 * 10 landing a hair above the
/// integer it represents.
int ceil_frac(double r, int n);

}  // namespace adr
