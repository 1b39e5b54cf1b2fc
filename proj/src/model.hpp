// SPDX-License-Identifier: Apache-2.0
//
// Dual-tower distillation model. The student path runs time tokens through
// the LoRA-adapted shared encoder and its own head; the teacher path runs
// gate-generated virtual text tokens through the frozen encoder and a frozen
// head copy. Frozen weights never receive updates, but gradients still flow
// through them to the gating parameters. Inference uses the student path
// alone.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "backbone.hpp"
#include "gating.hpp"
#include "losses.hpp"
#include "tensor.hpp"

namespace tstcd {

struct ModelConfig {
    BackboneConfig backbone;
    std::int64_t horizon = 8;
    std::int64_t lora_rank = 4;
    double lora_scale = 1.0;
    std::int64_t prompt_len = 8;

    double tau = 0.1;
    double gamma = 0.8;
    double alpha = 0.1;
    double beta = 0.01;
    double teacher_task_weight = 0.0;
    TaskLossKind task_kind = TaskLossKind::SmoothL1;
    OtOptions ot;

    // Component toggles: a disabled feature/ot loss zeroes its weight, a
    // disabled gate forces the pure self path.
    bool dag_enabled = true;
    bool feature_enabled = true;
    bool ot_enabled = true;

    double effective_alpha() const { return feature_enabled ? alpha : 0.0; }
    double effective_beta() const { return ot_enabled ? beta : 0.0; }
};

struct NamedParam {
    std::string name;
    TensorPtr tensor;
    bool trainable = false;
};

struct Batch {
    // Row-major sample buffers, each L x P input and H x P target.
    std::vector<const double*> inputs;
    std::vector<const double*> targets;
    std::int64_t n_variates = 0;
    std::int64_t size() const { return static_cast<std::int64_t>(inputs.size()); }
};

struct StepOutput {
    LossBreakdown losses;
    TensorPtr total;                  // scalar on the tape
    std::vector<TensorPtr> y_time;    // per sample, H x P
    std::vector<TensorPtr> y_text;    // per sample, H x P
    std::vector<TensorPtr> student_layers;  // per layer, N x M pooled features
    std::vector<TensorPtr> teacher_layers;
};

class DistillModel {
public:
    DistillModel(const ModelConfig& cfg, TensorPtr dhat, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const TensorPtr& principal_embedding() const { return dhat_; }

    // Full parameter registry in a fixed, checkpoint-stable order.
    const std::vector<NamedParam>& parameters() const { return params_; }
    std::vector<NamedParam> trainable_parameters() const;
    std::vector<NamedParam> frozen_parameters() const;

    void zero_grad();

    StepOutput forward_train(Graph& g, const Batch& batch);

    // Student-only path; returns the H x P forecast for one L x P window.
    TensorPtr forward_infer(Graph& g, const TensorPtr& window);

    // Direct access for checkpointing and tests.
    EmbedWeights& embed() { return embed_; }
    BackboneWeights& shared() { return shared_; }
    LoraSet& lora() { return lora_; }
    DagParams& dag() { return dag_; }
    HeadWeights& student_head() { return student_head_; }
    HeadWeights& teacher_head() { return teacher_head_; }

private:
    ModelConfig cfg_;
    TensorPtr dhat_;
    EmbedWeights embed_;         // trainable
    BackboneWeights shared_;     // frozen
    LoraSet lora_;               // trainable
    DagParams dag_;              // trainable
    HeadWeights student_head_;   // trainable
    HeadWeights teacher_head_;   // frozen copy of the student head init
    std::vector<NamedParam> params_;

    void register_params();
};

class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // Applies one update to every trainable parameter. Gradients must be
    // populated; non-finite gradients raise NumericError.
    void step(const std::vector<NamedParam>& trainable);

    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// One optimization step: zero grads, forward, backward, Adam update on the
// trainable set. Frozen parameters are untouched.
LossBreakdown train_step(DistillModel& model, const Batch& batch, AdamOptimizer& optimizer);

}  // namespace tstcd
