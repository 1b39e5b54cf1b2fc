// SPDX-License-Identifier: Apache-2.0
//
// Dynamic adaptive gating: virtual text tokens are generated from the time
// tokens by fusing two attention branches through a learned sigmoid gate.
// The self branch attends within the time tokens; the cross branch attends
// to learnable prompt rows stacked on projected vocabulary-subspace anchors.
// Both branches share the query projection, neither applies an output
// projection: head outputs are concatenated directly.
#pragma once

#include <cstdint>

#include "backbone.hpp"
#include "tensor.hpp"

namespace tstcd {

struct GateParams {
    TensorPtr w;  // 2M x M
    TensorPtr b;  // 1 x M
};

struct DagParams {
    TensorPtr w_q;                   // M x M, shared by both branches
    TensorPtr w_k_self, w_v_self;    // M x M
    TensorPtr w_k_cross, w_v_cross;  // M x M
    TensorPtr p_k, p_v;              // L_p x M prompts (per-head slices); null when L_p = 0
    GateParams gate;
    std::int64_t prompt_len = 0;
};

TensorPtr self_branch(Graph& g, const TensorPtr& x_time, const DagParams& dag,
                      const BackboneConfig& cfg);

// dhat may be null (no anchors); prompts may be empty; both at once is an error.
TensorPtr cross_branch(Graph& g, const TensorPtr& x_time, const TensorPtr& dhat,
                       const DagParams& dag, const BackboneConfig& cfg);

// g = sigmoid([x_cross; x_self] . W + b), output = x_cross.g + x_self.(1-g).
TensorPtr gate_fuse(Graph& g, const TensorPtr& x_cross, const TensorPtr& x_self,
                    const GateParams& gate);

// Full module. With ablate set the gate is forced to the self path and the
// cross branch is not evaluated.
TensorPtr dag_forward(Graph& g, const TensorPtr& x_time, const TensorPtr& dhat,
                      const DagParams& dag, const BackboneConfig& cfg, bool ablate = false);

DagParams init_dag(std::uint64_t seed, const BackboneConfig& cfg, std::int64_t prompt_len,
                   bool trainable = true);

}  // namespace tstcd
