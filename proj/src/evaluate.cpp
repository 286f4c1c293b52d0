#include "adr/evaluate.hpp"

#include "adr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

namespace adr {

void validate_performance_matrix(const PerformanceMatrix& m) {
    if (m.rows.empty()) throw ShapeError("performance matrix: empty");
    for (std::size_t t = 0; t < m.rows.size(); ++t) {
        if (m.rows[t].size() != t + 1)
            throw ShapeError("performance matrix: row " + std::to_string(t) + " has " +
                             std::to_string(m.rows[t].size()) + " entries, want " +
                             std::to_string(t + 1));
        for (double a : m.rows[t])
            if (!(a >= 0.0 && a <= 1.0))
                throw ShapeError("performance matrix: entry outside [0,1]");
    }
}

double avg_incremental_accuracy(const PerformanceMatrix& m) {
    validate_performance_matrix(m);
    double total = 0.0;
    for (std::size_t t = 0; t < m.rows.size(); ++t) {
        double row = 0.0;
        for (double a : m.rows[t]) row += a;
        total += row / static_cast<double>(t + 1);
    }
    return total / static_cast<double>(m.rows.size());
}

double final_accuracy(const PerformanceMatrix& m) {
    validate_performance_matrix(m);
    double row = 0.0;
    for (double a : m.rows.back()) row += a;
    return row / static_cast<double>(m.rows.back().size());
}

double learning_accuracy(const PerformanceMatrix& m) {
    validate_performance_matrix(m);
    double diag = 0.0;
    for (std::size_t t = 0; t < m.rows.size(); ++t) diag += m.rows[t][t];
    return diag / static_cast<double>(m.rows.size());
}

double class_skew(const TaskGraph& task) {
    std::map<int, int> counts;
    for (int c : task.classes) counts[c] = 0;
    for (int v = 0; v < task.num_nodes(); ++v)
        if (task.split[static_cast<std::size_t>(v)] == Split::train)
            ++counts[task.labels[static_cast<std::size_t>(v)]];
    int mx = 0;
    int mn = 0;
    bool first = true;
    for (auto [cls, n] : counts) {
        if (n == 0)
            throw ShapeError("class_skew: class " + std::to_string(cls) + " has no training nodes");
        mx = first ? n : std::max(mx, n);
        mn = first ? n : std::min(mn, n);
        first = false;
    }
    return static_cast<double>(mx) / static_cast<double>(mn);
}

DriftReport measure_drift(const std::vector<GcnModel>& checkpoints,
                          const std::vector<TaskGraph>& task_graphs) {
    if (checkpoints.size() != task_graphs.size())
        throw ShapeError("measure_drift: " + std::to_string(checkpoints.size()) +
                         " checkpoints for " + std::to_string(task_graphs.size()) + " tasks");
    if (checkpoints.empty()) throw ShapeError("measure_drift: nothing to measure");

    DriftReport report;
    double strict_sum = 0.0;
    int strict_count = 0;
    for (std::size_t i = 0; i < task_graphs.size(); ++i) {
        const Mat ref = forward_tapped(checkpoints[i], task_graphs[i], false).h_final;
        double ref_norm = 0.0;
        for (Eigen::Index v = 0; v < ref.rows(); ++v) ref_norm += ref.row(v).norm();
        ref_norm /= static_cast<double>(ref.rows());
        for (std::size_t t = i; t < checkpoints.size(); ++t) {
            DriftEntry e;
            e.task = static_cast<int>(i);
            e.checkpoint = static_cast<int>(t);
            if (t == i) {
                e.mean_l2 = 0.0;  // same snapshot, same graph, same pass
            } else {
                const Mat cur = forward_tapped(checkpoints[t], task_graphs[i], false).h_final;
                double d = 0.0;
                for (Eigen::Index v = 0; v < ref.rows(); ++v)
                    d += (cur.row(v) - ref.row(v)).norm();
                e.mean_l2 = d / static_cast<double>(ref.rows());
            }
            e.normalized = e.mean_l2 / std::max(1e-12, ref_norm);
            if (t > i) {
                strict_sum += e.normalized;
                ++strict_count;
            }
            report.entries.push_back(e);
        }
    }
    report.summary_normalized = strict_count ? strict_sum / strict_count : 0.0;
    return report;
}

nlohmann::json metrics_json(const PerformanceMatrix& m_test, const PerformanceMatrix& m_val,
                            const std::vector<double>& rho, const DriftReport* drift,
                            bool final_only) {
    validate_performance_matrix(m_test);
    validate_performance_matrix(m_val);
    nlohmann::json j;
    j["A_f"] = final_accuracy(m_test);
    if (final_only) {
        j["A_avg"] = nullptr;
        j["A_l"] = nullptr;
        j["per_task_A_t"] = nullptr;
    } else {
        j["A_avg"] = avg_incremental_accuracy(m_test);
        j["A_l"] = learning_accuracy(m_test);
        std::vector<double> per_task;
        for (std::size_t t = 0; t < m_test.rows.size(); ++t) {
            double row = 0.0;
            for (double a : m_test.rows[t]) row += a;
            per_task.push_back(row / static_cast<double>(t + 1));
        }
        j["per_task_A_t"] = per_task;
    }
    j["rho_t"] = rho;
    j["val"]["A_f"] = final_accuracy(m_val);
    if (final_only)
        j["val"]["A_avg"] = nullptr;
    else
        j["val"]["A_avg"] = avg_incremental_accuracy(m_val);
    if (drift) {
        nlohmann::json d;
        d["summary_normalized"] = drift->summary_normalized;
        d["pairs"] = nlohmann::json::array();
        for (const DriftEntry& e : drift->entries) {
            d["pairs"].push_back({{"task", e.task},
                                  {"checkpoint", e.checkpoint},
                                  {"mean_l2", e.mean_l2},
                                  {"normalized", e.normalized}});
        }
        j["drift"] = d;
    }
    return j;
}

void save_performance_csv(const std::filesystem::path& file, const PerformanceMatrix& m) {
    validate_performance_matrix(m);
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << std::setprecision(17);
    const int n = m.num_tasks();
    for (int i = 0; i < n; ++i) out << ",t" << i;
    out << '\n';
    for (int t = 0; t < n; ++t) {
        out << 't' << t;
        for (int i = 0; i < n; ++i) {
            out << ',';
            if (i <= t) out << m.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        }
        out << '\n';
    }
    if (!out) throw IoError("write failure: " + file.string());
}

PerformanceMatrix load_performance_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty performance csv: " + file.string());
    PerformanceMatrix m;
    std::size_t t = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // row header
        while (std::getline(ss, cell, ',')) {
            if (cell.empty()) break;
            row.push_back(std::stod(cell));
        }
        if (row.size() != t + 1)
            throw IoError("performance csv row " + std::to_string(t) + ": bad entry count");
        m.rows.push_back(std::move(row));
        ++t;
    }
    validate_performance_matrix(m);
    return m;
}

}  // namespace adr
