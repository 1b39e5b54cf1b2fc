// SPDX-License-Identifier: Apache-2.0

#include "gating.hpp"

#include <cmath>

#include "errors.hpp"
#include "rng.hpp"

namespace tstcd {

namespace {

// Attention of x-queries against an explicit key/value token matrix,
// per head, heads concatenated. No output projection.
TensorPtr attend(Graph& g, const TensorPtr& x, const TensorPtr& w_q, const TensorPtr& keys,
                 const TensorPtr& values, const BackboneConfig& cfg) {
    const std::int64_t dk = cfg.d_k();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    TensorPtr q = g.matmul(x, w_q);
    TensorPtr merged;
    for (std::int64_t h = 0; h < cfg.n_heads; ++h) {
        TensorPtr qh = g.slice_cols(q, h * dk, (h + 1) * dk);
        TensorPtr kh = g.slice_cols(keys, h * dk, (h + 1) * dk);
        TensorPtr vh = g.slice_cols(values, h * dk, (h + 1) * dk);
        TensorPtr scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dk);
        TensorPtr att = g.matmul(g.softmax_rows(scores), vh);
        merged = merged ? g.concat_cols(merged, att) : att;
    }
    return merged;
}

}  // namespace

TensorPtr self_branch(Graph& g, const TensorPtr& x_time, const DagParams& dag,
                      const BackboneConfig& cfg) {
    if (x_time->cols() != cfg.M) {
        throw std::invalid_argument("self_branch: token width " + std::to_string(x_time->cols()) +
                                    " does not match model width " + std::to_string(cfg.M));
    }
    TensorPtr keys = g.matmul(x_time, dag.w_k_self);
    TensorPtr values = g.matmul(x_time, dag.w_v_self);
    return attend(g, x_time, dag.w_q, keys, values, cfg);
}

TensorPtr cross_branch(Graph& g, const TensorPtr& x_time, const TensorPtr& dhat,
                       const DagParams& dag, const BackboneConfig& cfg) {
    if (x_time->cols() != cfg.M) {
        throw std::invalid_argument("cross_branch: token width " + std::to_string(x_time->cols()) +
                                    " does not match model width " + std::to_string(cfg.M));
    }
    if (!dhat && dag.prompt_len == 0) {
        throw ConfigError("cross_branch: no keys available (zero anchors and zero prompt length)");
    }
    if (dhat && dhat->cols() != cfg.M) {
        throw std::invalid_argument("cross_branch: anchor width " + std::to_string(dhat->cols()) +
                                    " does not match model width " + std::to_string(cfg.M));
    }

    // Keys/values are prompts stacked on projected anchors; per head this is
    // the [P_k; D-hat . W_k] arrangement with L_p + d key positions.
    TensorPtr keys, values;
    if (dhat) {
        keys = g.matmul(dhat, dag.w_k_cross);
        values = g.matmul(dhat, dag.w_v_cross);
        if (dag.prompt_len > 0) {
            keys = g.concat_rows({dag.p_k, keys});
            values = g.concat_rows({dag.p_v, values});
        }
    } else {
        keys = dag.p_k;
        values = dag.p_v;
    }
    return attend(g, x_time, dag.w_q, keys, values, cfg);
}

TensorPtr gate_fuse(Graph& g, const TensorPtr& x_cross, const TensorPtr& x_self,
                    const GateParams& gate) {
    if (x_cross->shape != x_self->shape) {
        throw std::invalid_argument("gate_fuse: branch shapes disagree, " + x_cross->shape_str() +
                                    " vs " + x_self->shape_str());
    }
    const std::int64_t m = x_cross->cols();
    if (gate.w->rows() != 2 * m || gate.w->cols() != m) {
        throw std::invalid_argument("gate_fuse: gate weight must be " + std::to_string(2 * m) + "x" +
                                    std::to_string(m) + ", got " + gate.w->shape_str());
    }
    TensorPtr gv = g.sigmoid(g.add_row(g.matmul(g.concat_cols(x_cross, x_self), gate.w), gate.b));
    TensorPtr ones = Tensor::full(gv->shape, 1.0, false);
    return g.add(g.mul(x_cross, gv), g.mul(x_self, g.sub(ones, gv)));
}

TensorPtr dag_forward(Graph& g, const TensorPtr& x_time, const TensorPtr& dhat,
                      const DagParams& dag, const BackboneConfig& cfg, bool ablate) {
    TensorPtr x_self = self_branch(g, x_time, dag, cfg);
    if (ablate) return x_self;  // gate forced to 0
    TensorPtr x_cross = cross_branch(g, x_time, dhat, dag, cfg);
    return gate_fuse(g, x_cross, x_self, dag.gate);
}

DagParams init_dag(std::uint64_t seed, const BackboneConfig& cfg, std::int64_t prompt_len,
                   bool trainable) {
    cfg.validate();
    if (prompt_len < 0) throw ConfigError("gating: prompt length must be >= 0");
    Rng rng(seed);
    auto mat = [&](std::int64_t r, std::int64_t c, double sd) {
        std::vector<double> d(static_cast<std::size_t>(r * c));
        for (auto& v : d) v = rng.gaussian(0.0, sd);
        return Tensor::from({r, c}, std::move(d), trainable);
    };
    DagParams dag;
    dag.w_q = mat(cfg.M, cfg.M, 0.02);
    dag.w_k_self = mat(cfg.M, cfg.M, 0.02);
    dag.w_v_self = mat(cfg.M, cfg.M, 0.02);
    dag.w_k_cross = mat(cfg.M, cfg.M, 0.02);
    dag.w_v_cross = mat(cfg.M, cfg.M, 0.02);
    dag.prompt_len = prompt_len;
    if (prompt_len > 0) {
        dag.p_k = mat(prompt_len, cfg.M, 0.02);
        dag.p_v = mat(prompt_len, cfg.M, 0.02);
    }
    dag.gate.w = mat(2 * cfg.M, cfg.M, 0.02);
    dag.gate.b = Tensor::zeros({1, cfg.M}, trainable);
    return dag;
}

}  // namespace tstcd
