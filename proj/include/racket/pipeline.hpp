#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "racket/crossval.hpp"
#include "racket/simulator.hpp"

namespace racket {

// A pipeline stage failed; exit_code follows the CLI contract (2 = bad or
// missing data, 3 = stage failure).
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, int exit_code = 3)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), exit_(exit_code) {}
    const std::string& stage() const { return stage_; }
    int exit_code() const { return exit_; }

private:
    std::string stage_;
    int exit_;
};

struct FaultConfig {
    double drop = 0.0;        // transport-level chunk faults
    double corrupt = 0.0;
    double replay = 0.0;
    double reinstall_rate = 0.0;  // stream-level device faults
    double share_rate = 0.0;
    double suppression_rate = 0.0;

    bool stream_faults() const {
        return reinstall_rate > 0 || share_rate > 0 || suppression_rate > 0;
    }
};

struct TrainConfig {
    int folds = 10;
    int repeats = 5;
    int trees = 50;
    int max_depth = 12;
    int min_samples_leaf = 5;
    double smote_ratio = 1.0;
    int smote_k = 5;
};

struct PipelineConfig {
    FleetConfig fleet;
    FaultConfig faults;
    TrainConfig train;
    std::filesystem::path out_dir = "out";

    void check() const;  // throws std::invalid_argument
};

// Config files use a TOML-layout subset: [section] headers, `key = value`
// lines, `#` comments; values are quoted strings, integers, floats or
// booleans. Unknown keys are rejected. The RACKET_OUT_DIR environment
// variable overrides out_dir (paths only, per the config contract).
PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Canonical artifact layout under out_dir.
struct PipelinePaths {
    std::filesystem::path root;
    explicit PipelinePaths(std::filesystem::path out_dir) : root(std::move(out_dir)) {}

    std::filesystem::path sim_dir() const { return root / "sim"; }
    std::filesystem::path store_dir() const { return root / "store"; }
    std::filesystem::path devices() const { return root / "devices.jsonl"; }
    std::filesystem::path app_instances() const { return root / "app_instances.jsonl"; }
    std::filesystem::path device_instances() const { return root / "device_instances.jsonl"; }
    std::filesystem::path app_csv() const { return root / "app_features.csv"; }
    std::filesystem::path device_csv() const { return root / "device_features.csv"; }
    std::filesystem::path models_dir() const { return root / "models"; }
    std::filesystem::path reports_dir() const { return root / "reports"; }
    std::filesystem::path report_csv() const { return root / "report.csv"; }
    std::filesystem::path report_txt() const { return root / "report.txt"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
};

// Individual stages; each is re-runnable from its persisted inputs.
void stage_simulate(const PipelineConfig& cfg, const std::filesystem::path& sim_dir);
void stage_ingest(const std::filesystem::path& sim_dir, const std::filesystem::path& store_dir,
                  const FaultConfig& faults, uint64_t seed);
void stage_fingerprint(const std::filesystem::path& store_dir,
                       const std::filesystem::path& devices_out);
void stage_extract(const std::filesystem::path& store_dir, const std::filesystem::path& devices,
                   const std::filesystem::path& reviews, const std::filesystem::path& apps,
                   const std::filesystem::path& truth, const PipelinePaths& out,
                   const TrainConfig& train, uint64_t seed);
// Trains a full-data model, saves it, runs repeated CV and writes the report
// (CSV + JSON). `sampling` follows crossval naming ("none"/"smote"/...).
ModelReport stage_train(const std::filesystem::path& instances_path, Algo algo,
                        const std::string& sampling, const TrainConfig& train, uint64_t seed,
                        const std::filesystem::path& model_out,
                        const std::filesystem::path& report_prefix);
void stage_report(const std::filesystem::path& device_instances,
                  const std::filesystem::path& out_csv, const std::filesystem::path& out_txt);
void write_manifest(const PipelineConfig& cfg, const PipelinePaths& paths);

// simulate -> ingest -> fingerprint -> extract -> train/evaluate -> report,
// then the digest manifest. Throws StageError with the failing stage name.
void run_pipeline(const PipelineConfig& cfg);

}  // namespace racket
