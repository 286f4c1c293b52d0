#pragma once

#include "adr/acr.hpp"
#include "adr/datasets.hpp"
#include "adr/encoder.hpp"
#include "adr/evaluate.hpp"
#include "adr/ham.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace adr {

enum class Method { adr, bare, joint, frozen_analytic };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct DatasetSource {
    bool from_files = false;
    std::filesystem::path path;  // when from_files
    SbmSpec sbm;                 // otherwise
};

struct ExperimentConfig {
    Method method = Method::adr;
    std::vector<int> hidden_dims{128, 128};  // output dim of each GCN layer
    double dropout = 0.5;
    double lr_base = 1e-3;
    double lr_incremental = 1e-4;
    int epochs = 200;
    int batch_size = 2000;
    double gamma = 1e-3;
    int alpha = 1;
    bool measure_drift = false;
    std::uint64_t seed_model_init = 1;
    std::uint64_t seed_dropout = 2;
    std::uint64_t seed_feature_buffer = 3;
    DatasetSource dataset;
    TaskStreamSpec task_stream;
    std::filesystem::path output_dir;  // empty: keep everything in memory
    nlohmann::json echo;               // the resolved config this run came from
};

RawDataset load_config_dataset(const ExperimentConfig& cfg);

/// What a method still holds after finishing a task, for the no-raw-data
/// audit: every retained matrix with its dimensions.
struct RetainedTensor {
    std::string name;
    long long rows = 0;
    long long cols = 0;
};
using AuditHook = std::function<void(int task_id, const std::vector<RetainedTensor>&)>;

/// Model and banks as they stand at the end of a run, for checkpointing.
struct FinalState {
    GcnModel model;
    std::optional<EncoderMemoryBank> encoder_bank;
    std::optional<ClassifierMemoryBank> classifier_bank;
    std::optional<FeatureBuffer> buffer;
    double gamma = 0.0;
    std::optional<Mat> reconstructed_classifier;
};

struct RunRecord {
    Method method = Method::adr;
    PerformanceMatrix m_test;
    PerformanceMatrix m_val;
    std::vector<double> rho;
    std::vector<double> task_seconds;
    std::vector<std::uint64_t> bank_checksums;  // per task; 0 for bankless methods
    std::optional<DriftReport> drift;
    FinalState final_state;
    nlohmann::json config_echo;
};

RunRecord run_adr(const ExperimentConfig& cfg, const RawDataset& ds, const AuditHook& audit = {});
RunRecord run_bare(const ExperimentConfig& cfg, const RawDataset& ds, const AuditHook& audit = {});
RunRecord run_joint(const ExperimentConfig& cfg, const RawDataset& ds, const AuditHook& audit = {});
RunRecord run_frozen_analytic(const ExperimentConfig& cfg, const RawDataset& ds,
                              const AuditHook& audit = {});

/// Loads the dataset and dispatches on cfg.method.
RunRecord run_experiment(const ExperimentConfig& cfg, const AuditHook& audit = {});

/// metrics.json, m_test.csv, m_val.csv, run_record.json into dir; wall times
/// go to timings.json so the result files are byte-stable across runs.
void persist_record(const std::filesystem::path& dir, const RunRecord& record);

/// Model plus bank checkpoints under dir/checkpoints.
void persist_checkpoints(const std::filesystem::path& dir, const RunRecord& record);

}  // namespace adr
