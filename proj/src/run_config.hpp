// SPDX-License-Identifier: Apache-2.0
//
// Flat key = value run configuration. Unknown keys are rejected with the
// offending name; serialization emits keys in a fixed order so that
// parse -> serialize -> parse is the identity.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "losses.hpp"
#include "model.hpp"
#include "series.hpp"

namespace tstcd {

struct RunConfig {
    // data
    std::string data_source = "synth";  // synth | csv
    std::string csv_path;
    std::uint64_t synth_seed = 7;
    std::int64_t synth_t = 240;
    std::int64_t synth_p = 3;
    std::vector<double> synth_periods = {24.0, 36.0};
    std::vector<double> synth_amplitudes = {1.0, 0.6};
    double synth_trend = 0.0;
    double synth_noise_std = 0.1;
    bool normalize = true;
    double split_train = 0.7, split_val = 0.1, split_test = 0.2;

    // windows
    std::int64_t lookback = 32;
    std::int64_t horizon = 8;
    std::int64_t stride = 1;

    // backbone
    std::int64_t width = 32;
    std::int64_t layers = 3;
    std::int64_t heads = 4;
    std::int64_t ffn_mult = 4;

    // vocabulary subspace
    std::uint64_t vocab_seed = 101;
    std::int64_t vocab_size = 512;
    std::int64_t max_anchor_tokens = 64;
    double rank_tol = 1e-10;
    bool vocab_pivoted = false;

    // gating
    std::int64_t prompt_len = 8;

    // losses
    double tau = 0.1;
    double gamma = 0.8;
    double alpha = 0.1;
    double beta = 0.01;
    double mu = 0.1;
    int sinkhorn_iters = 100;
    double sinkhorn_tol = 1e-9;
    std::string task = "smooth_l1";  // smooth_l1 | smape | mse
    std::string ot_cost = "sqeuclidean";  // sqeuclidean | absolute
    std::string ot_axis = "variate";      // variate | horizon
    bool ot_unrolled = false;
    double teacher_task_weight = 0.0;

    // lora
    std::int64_t lora_rank = 4;
    double lora_scale = 1.0;

    // training
    double lr = 5e-4;
    std::int64_t epochs = 200;
    std::int64_t batch = 16;
    std::uint64_t seed = 42;

    // evaluation; 0 means unspecified (owa omitted, mase uses m = 1)
    std::int64_t seasonality = 0;

    // component toggles
    bool ablation_dag = true;
    bool ablation_feature = true;
    bool ablation_ot = true;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    std::string serialize() const;
    void save_file(const std::string& path) const;

    void validate() const;

    ModelConfig model_config() const;
    SynthSpec synth_spec() const;
    TaskLossKind task_kind() const;
};

}  // namespace tstcd
