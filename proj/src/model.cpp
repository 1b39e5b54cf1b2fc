// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <cmath>

#include "errors.hpp"

namespace tstcd {

DistillModel::DistillModel(const ModelConfig& cfg, TensorPtr dhat, std::uint64_t seed)
    : cfg_(cfg), dhat_(std::move(dhat)) {
    cfg_.backbone.validate();
    if (dhat_ && dhat_->cols() != cfg_.backbone.M) {
        throw ConfigError("model: principal embedding width " + std::to_string(dhat_->cols()) +
                          " does not match model width " + std::to_string(cfg_.backbone.M));
    }
    if (!dhat_ && cfg_.prompt_len == 0 && cfg_.dag_enabled) {
        throw ConfigError("model: gating needs anchors or prompts");
    }

    // Distinct derived seeds per group so resizing one group leaves the
    // others' draws unchanged.
    shared_ = init_pretrained(seed * 6364136223846793005ULL + 1, cfg_.backbone, /*trainable=*/false);
    embed_ = init_embed(seed * 6364136223846793005ULL + 2, cfg_.backbone, /*trainable=*/true);
    lora_ = init_lora(seed * 6364136223846793005ULL + 3, cfg_.backbone, cfg_.lora_rank,
                      cfg_.lora_scale, /*trainable=*/true);
    dag_ = init_dag(seed * 6364136223846793005ULL + 4, cfg_.backbone, cfg_.prompt_len,
                    /*trainable=*/true);
    student_head_ = init_head(seed * 6364136223846793005ULL + 5, cfg_.backbone, cfg_.horizon,
                              /*trainable=*/true);
    // The teacher head shares the student head's initial values but is frozen.
    teacher_head_.w = Tensor::from(student_head_.w->shape, student_head_.w->data, false);
    teacher_head_.b = Tensor::from(student_head_.b->shape, student_head_.b->data, false);

    register_params();
}

void DistillModel::register_params() {
    auto reg = [this](const std::string& name, const TensorPtr& t, bool trainable) {
        if (t) params_.push_back(NamedParam{name, t, trainable});
    };

    reg("embed.w", embed_.w, true);
    reg("embed.b", embed_.b, true);
    reg("embed.attn.wq", embed_.attn.wq, true);
    reg("embed.attn.wk", embed_.attn.wk, true);
    reg("embed.attn.wv", embed_.attn.wv, true);
    reg("embed.attn.wo", embed_.attn.wo, true);

    for (std::size_t i = 0; i < shared_.blocks.size(); ++i) {
        const std::string p = "enc." + std::to_string(i) + ".";
        BlockWeights& blk = shared_.blocks[i];
        reg(p + "ln1.g", blk.ln1_g, false);
        reg(p + "ln1.b", blk.ln1_b, false);
        reg(p + "attn.wq", blk.attn.wq, false);
        reg(p + "attn.wk", blk.attn.wk, false);
        reg(p + "attn.wv", blk.attn.wv, false);
        reg(p + "attn.wo", blk.attn.wo, false);
        reg(p + "ln2.g", blk.ln2_g, false);
        reg(p + "ln2.b", blk.ln2_b, false);
        reg(p + "ffn.w1", blk.ffn_w1, false);
        reg(p + "ffn.b1", blk.ffn_b1, false);
        reg(p + "ffn.w2", blk.ffn_w2, false);
        reg(p + "ffn.b2", blk.ffn_b2, false);
    }
    reg("enc.final_ln.g", shared_.ln_f_g, false);
    reg("enc.final_ln.b", shared_.ln_f_b, false);

    for (std::size_t i = 0; i < lora_.size(); ++i) {
        const std::string p = "lora." + std::to_string(i) + ".";
        BlockAdapters& blk = lora_[i];
        reg(p + "q.a", blk.q.a, true);
        reg(p + "q.b", blk.q.b, true);
        reg(p + "k.a", blk.k.a, true);
        reg(p + "k.b", blk.k.b, true);
        reg(p + "v.a", blk.v.a, true);
        reg(p + "v.b", blk.v.b, true);
        reg(p + "o.a", blk.o.a, true);
        reg(p + "o.b", blk.o.b, true);
    }

    reg("dag.wq", dag_.w_q, true);
    reg("dag.k_self", dag_.w_k_self, true);
    reg("dag.v_self", dag_.w_v_self, true);
    reg("dag.k_cross", dag_.w_k_cross, true);
    reg("dag.v_cross", dag_.w_v_cross, true);
    reg("dag.p_k", dag_.p_k, true);
    reg("dag.p_v", dag_.p_v, true);
    reg("dag.gate.w", dag_.gate.w, true);
    reg("dag.gate.b", dag_.gate.b, true);

    reg("head.student.w", student_head_.w, true);
    reg("head.student.b", student_head_.b, true);
    reg("head.teacher.w", teacher_head_.w, false);
    reg("head.teacher.b", teacher_head_.b, false);
}

std::vector<NamedParam> DistillModel::trainable_parameters() const {
    std::vector<NamedParam> out;
    for (const auto& p : params_)
        if (p.trainable) out.push_back(p);
    return out;
}

std::vector<NamedParam> DistillModel::frozen_parameters() const {
    std::vector<NamedParam> out;
    for (const auto& p : params_)
        if (!p.trainable) out.push_back(p);
    return out;
}

void DistillModel::zero_grad() {
    for (auto& p : params_) p.tensor->zero_grad();
}

StepOutput DistillModel::forward_train(Graph& g, const Batch& batch) {
    const std::int64_t N = batch.size();
    if (N < 1) throw std::invalid_argument("forward_train: empty batch");
    const std::int64_t L = cfg_.backbone.L;
    const std::int64_t n_variates = batch.n_variates;
    if (n_variates < 1) throw std::invalid_argument("forward_train: batch has no variates");

    StepOutput out;
    TensorPtr task_sum, ot_sum;
    std::vector<std::vector<TensorPtr>> student_pooled(static_cast<std::size_t>(cfg_.backbone.n_layers));
    std::vector<std::vector<TensorPtr>> teacher_pooled(static_cast<std::size_t>(cfg_.backbone.n_layers));

    for (std::int64_t s = 0; s < N; ++s) {
        // One window: L x P input, H x P target, both constants on the tape.
        TensorPtr window = Tensor::from(
            {L, n_variates},
            std::vector<double>(batch.inputs[static_cast<std::size_t>(s)],
                                batch.inputs[static_cast<std::size_t>(s)] + L * n_variates),
            false);
        TensorPtr target = Tensor::from(
            {cfg_.horizon, n_variates},
            std::vector<double>(batch.targets[static_cast<std::size_t>(s)],
                                batch.targets[static_cast<std::size_t>(s)] + cfg_.horizon * n_variates),
            false);

        TensorPtr x_time = embed_variates(g, window, embed_, cfg_.backbone);

        EncoderResult student = encoder_forward(g, x_time, shared_, cfg_.backbone, &lora_);
        TensorPtr y_time = forecast_head(g, student.tokens, student_head_);

        TensorPtr x_text = dag_forward(g, x_time, dhat_, dag_, cfg_.backbone, !cfg_.dag_enabled);
        EncoderResult teacher = encoder_forward(g, x_text, shared_, cfg_.backbone, nullptr);
        TensorPtr y_text = forecast_head(g, teacher.tokens, teacher_head_);

        TensorPtr task_s = task_loss(g, y_time, target, cfg_.task_kind);
        if (cfg_.teacher_task_weight > 0.0) {
            task_s = g.add(task_s,
                           g.scale(task_loss(g, y_text, target, cfg_.task_kind),
                                   cfg_.teacher_task_weight));
        }
        task_sum = task_sum ? g.add(task_sum, task_s) : task_s;

        TensorPtr ot_s = ot_loss(g, y_time, y_text, cfg_.ot);
        ot_sum = ot_sum ? g.add(ot_sum, ot_s) : ot_s;

        for (std::int64_t m = 0; m < cfg_.backbone.n_layers; ++m) {
            student_pooled[static_cast<std::size_t>(m)].push_back(
                student.trace.pooled[static_cast<std::size_t>(m)]);
            teacher_pooled[static_cast<std::size_t>(m)].push_back(
                teacher.trace.pooled[static_cast<std::size_t>(m)]);
        }
        out.y_time.push_back(y_time);
        out.y_text.push_back(y_text);
    }

    TensorPtr task_mean = g.scale(task_sum, 1.0 / static_cast<double>(N));
    TensorPtr ot_mean = g.scale(ot_sum, 1.0 / static_cast<double>(N));

    // Batch pooled features per layer, N x M each.
    std::vector<TensorPtr> time_layers, text_layers;
    for (std::int64_t m = 0; m < cfg_.backbone.n_layers; ++m) {
        time_layers.push_back(g.concat_rows(student_pooled[static_cast<std::size_t>(m)]));
        text_layers.push_back(g.concat_rows(teacher_pooled[static_cast<std::size_t>(m)]));
    }
    FeatureLossResult feature = feature_loss(g, time_layers, text_layers, cfg_.gamma, cfg_.tau);

    out.total = total_loss(g, task_mean, feature.total, ot_mean, cfg_.effective_alpha(),
                           cfg_.effective_beta());

    out.student_layers = std::move(time_layers);
    out.teacher_layers = std::move(text_layers);
    out.losses.task = task_mean->item();
    out.losses.feature = feature.total->item();
    for (const auto& l : feature.per_layer) out.losses.feature_per_layer.push_back(l->item());
    out.losses.ot = ot_mean->item();
    out.losses.total = out.total->item();
    out.losses.alpha = cfg_.effective_alpha();
    out.losses.beta = cfg_.effective_beta();
    out.losses.gamma = cfg_.gamma;
    out.losses.tau = cfg_.tau;
    out.losses.mu = cfg_.ot.mu;
    if (!std::isfinite(out.losses.total)) throw NumericError("forward_train: total loss is not finite");
    return out;
}

TensorPtr DistillModel::forward_infer(Graph& g, const TensorPtr& window) {
    TensorPtr x_time = embed_variates(g, window, embed_, cfg_.backbone);
    EncoderResult student = encoder_forward(g, x_time, shared_, cfg_.backbone, &lora_);
    return forecast_head(g, student.tokens, student_head_);
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr < 0.0) throw ConfigError("adam: learning rate must be >= 0");
}

void AdamOptimizer::step(const std::vector<NamedParam>& trainable) {
    if (m_.empty()) {
        m_.resize(trainable.size());
        v_.resize(trainable.size());
        for (std::size_t i = 0; i < trainable.size(); ++i) {
            m_[i].assign(trainable[i].tensor->data.size(), 0.0);
            v_[i].assign(trainable[i].tensor->data.size(), 0.0);
        }
    }
    if (m_.size() != trainable.size()) {
        throw ConfigError("adam: optimizer state does not match the trainable set");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < trainable.size(); ++i) {
        Tensor& t = *trainable[i].tensor;
        if (m_[i].size() != t.data.size()) {
            throw ConfigError("adam: state size mismatch for " + trainable[i].name);
        }
        for (std::size_t k = 0; k < t.data.size(); ++k) {
            const double grad = t.grad[k];
            if (!std::isfinite(grad)) {
                throw NumericError("adam: non-finite gradient in " + trainable[i].name);
            }
            m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * grad;
            v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * grad * grad;
            const double mhat = m_[i][k] / bc1;
            const double vhat = v_[i][k] / bc2;
            t.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

LossBreakdown train_step(DistillModel& model, const Batch& batch, AdamOptimizer& optimizer) {
    model.zero_grad();
    Graph g;
    StepOutput out = model.forward_train(g, batch);
    g.backward(out.total);
    auto trainable = model.trainable_parameters();
    optimizer.step(trainable);
    return out.losses;
}

}  // namespace tstcd
