// SPDX-License-Identifier: Apache-2.0
//
// The shared encoder used by both towers, plus the time-series input path.
//
// Input path: each variate's length-L history is projected to one M-dim
// token, then one multi-head self-attention pass mixes the P tokens.
//
// Encoder block wiring (pre-norm residual):
//   a = layer_norm(x, ln1)        ; x = x + MHSA(a)
//   h = layer_norm(x, ln2)        ; x = x + W2 . gelu(W1 . h + b1) + b2
//   trace[m] = mean over tokens of x     (captured after block m)
// After the last block a final layer norm is applied; the trace is captured
// before it, so trace entry m never depends on later computation.
//
// LoRA adapters add scale * B.A to the attention projections of the student
// tower; rank 0 or zero factors leave the frozen forward bit-identical.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace tstcd {

struct BackboneConfig {
    std::int64_t M = 32;        // model width
    std::int64_t n_layers = 3;  // encoder depth
    std::int64_t n_heads = 4;
    std::int64_t ffn_mult = 4;
    std::int64_t L = 32;  // lookback length

    std::int64_t d_k() const { return M / n_heads; }
    void validate() const;
};

struct AttentionWeights {
    TensorPtr wq, wk, wv, wo;  // M x M each
};

struct BlockWeights {
    TensorPtr ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x M
    AttentionWeights attn;
    TensorPtr ffn_w1, ffn_b1;  // M x (mult*M), 1 x (mult*M)
    TensorPtr ffn_w2, ffn_b2;  // (mult*M) x M, 1 x M
};

struct BackboneWeights {
    std::vector<BlockWeights> blocks;
    TensorPtr ln_f_g, ln_f_b;  // final layer norm
};

struct EmbedWeights {
    TensorPtr w, b;  // L x M projection, 1 x M bias
    AttentionWeights attn;
};

struct HeadWeights {
    TensorPtr w, b;  // M x H, 1 x H
};

struct LoraAdapter {
    TensorPtr a;  // r x M
    TensorPtr b;  // M x r
    std::int64_t rank = 0;
    double scale = 1.0;
};

struct BlockAdapters {
    LoraAdapter q, k, v, o;
};

using LoraSet = std::vector<BlockAdapters>;  // one entry per encoder block

// Per-layer pooled features, one 1 x M row per block.
struct LayerTrace {
    std::vector<TensorPtr> pooled;
};

// Multi-head self-attention over P tokens; adapters, when given, are added
// to the projection weights as W + scale * B.A.
TensorPtr multi_head_attention(Graph& g, const TensorPtr& x, const AttentionWeights& w,
                               const BackboneConfig& cfg, const BlockAdapters* adapters = nullptr);

// Linear projection of an L x P window into P tokens of width M (no attention).
TensorPtr project_variates(Graph& g, const TensorPtr& window, const EmbedWeights& w,
                           const BackboneConfig& cfg);

// project_variates followed by one MHSA pass: the X_time token matrix.
TensorPtr embed_variates(Graph& g, const TensorPtr& window, const EmbedWeights& w,
                         const BackboneConfig& cfg);

struct EncoderResult {
    TensorPtr tokens;  // P x M, after the final layer norm
    LayerTrace trace;
};

EncoderResult encoder_forward(Graph& g, const TensorPtr& tokens, const BackboneWeights& w,
                              const BackboneConfig& cfg, const LoraSet* adapters = nullptr);

// Per-token linear map M -> H, transposed to an H x P forecast.
TensorPtr forecast_head(Graph& g, const TensorPtr& tokens, const HeadWeights& w);

// Deterministic initialization. Encoder matrices are N(0, 0.02^2), layer
// norms start at identity, biases at zero; the variate projection uses
// N(0, 1/L) and the head N(0, 1/M) to keep unit-scale activations.
BackboneWeights init_pretrained(std::uint64_t seed, const BackboneConfig& cfg, bool trainable = false);
EmbedWeights init_embed(std::uint64_t seed, const BackboneConfig& cfg, bool trainable = true);
HeadWeights init_head(std::uint64_t seed, const BackboneConfig& cfg, std::int64_t horizon,
                      bool trainable = true);
LoraSet init_lora(std::uint64_t seed, const BackboneConfig& cfg, std::int64_t rank, double scale,
                  bool trainable = true);

}  // namespace tstcd
