// SPDX-License-Identifier: Apache-2.0
//
// Run drivers behind the command surface: data preparation, the training
// loop with its loss trace, evaluation with forecasting metrics, file
// forecasting, the ablation sweep and the whole-model gradient check.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"
#include "run_config.hpp"
#include "series.hpp"
#include "tensor.hpp"

namespace tstcd {

struct PreparedData {
    SeriesTable raw;
    SeriesSplits raw_splits;     // raw scale
    NormStats stats;             // from the training split
    bool normalized = false;
    WindowSet train_windows;     // model scale (normalized when enabled)
    WindowSet val_windows;
    WindowSet test_windows;
};

PreparedData prepare_data(const RunConfig& cfg);

// Builds the principal embedding for the configured synthetic vocabulary:
// detected rank capped at vocab.max_anchor_tokens.
TensorPtr build_anchor_embedding(const RunConfig& cfg);

std::unique_ptr<DistillModel> build_model(const RunConfig& cfg);

struct EpochRecord {
    double task = 0.0, feature = 0.0, ot = 0.0, total = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> trace;
    std::string checkpoint_path;
    std::string trace_path;
};

TrainResult run_train(const RunConfig& cfg, const std::string& out_dir);

MetricsReport run_eval(const std::string& checkpoint_path, const RunConfig& cfg);

// Forecast horizon rows from the last lookback window of the input CSV.
// horizon = 0 uses the trained horizon; larger values are an error.
void run_forecast(const std::string& checkpoint_path, const std::string& input_csv,
                  std::int64_t horizon, const std::string& out_csv);

struct AblationRow {
    std::string name;
    bool dag = false, feature = false, ot = false;
    MetricsReport metrics;
};

// The four-row sweep: each component alone, then the full model.
std::vector<AblationRow> run_ablate(const RunConfig& cfg, const std::string& out_dir);
std::string ablation_table_json(const std::vector<AblationRow>& rows);

GradCheckReport run_grad_check(const RunConfig& cfg, int max_coords, double epsilon);

void run_synth(const RunConfig& cfg, const std::string& out_csv);

// Checkpoint round trip for a model plus its normalization metadata.
void save_model_checkpoint(const DistillModel& model, const NormStats& stats, bool normalized,
                           const std::string& path);

struct LoadedModel {
    std::unique_ptr<DistillModel> model;
    NormStats stats;
    bool normalized = false;
};

LoadedModel load_model_checkpoint(const std::string& path);

}  // namespace tstcd
