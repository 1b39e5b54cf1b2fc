// SPDX-License-Identifier: Apache-2.0

#include "backbone.hpp"

#include <cmath>

#include "errors.hpp"
#include "rng.hpp"

namespace tstcd {

namespace {

TensorPtr gaussian_matrix(Rng& rng, std::int64_t rows, std::int64_t cols, double stddev,
                          bool trainable) {
    std::vector<double> d(static_cast<std::size_t>(rows * cols));
    for (auto& v : d) v = rng.gaussian(0.0, stddev);
    return Tensor::from({rows, cols}, std::move(d), trainable);
}

// W + scale * B.A when the adapter is active, otherwise W itself.
TensorPtr adapted(Graph& g, const TensorPtr& w, const LoraAdapter* lora) {
    if (!lora || lora->rank == 0 || lora->scale == 0.0) return w;
    return g.add(w, g.scale(g.matmul(lora->b, lora->a), lora->scale));
}

}  // namespace

void BackboneConfig::validate() const {
    if (M < 1 || n_layers < 1 || n_heads < 1 || ffn_mult < 1 || L < 1) {
        throw ConfigError("backbone: all dimensions must be >= 1");
    }
    if (M % n_heads != 0) {
        throw ConfigError("backbone: width " + std::to_string(M) + " not divisible by " +
                          std::to_string(n_heads) + " heads");
    }
}

TensorPtr multi_head_attention(Graph& g, const TensorPtr& x, const AttentionWeights& w,
                               const BackboneConfig& cfg, const BlockAdapters* adapters) {
    if (x->cols() != cfg.M) {
        throw std::invalid_argument("attention: token width " + std::to_string(x->cols()) +
                                    " does not match model width " + std::to_string(cfg.M));
    }
    const std::int64_t dk = cfg.d_k();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    TensorPtr q = g.matmul(x, adapted(g, w.wq, adapters ? &adapters->q : nullptr));
    TensorPtr k = g.matmul(x, adapted(g, w.wk, adapters ? &adapters->k : nullptr));
    TensorPtr v = g.matmul(x, adapted(g, w.wv, adapters ? &adapters->v : nullptr));

    TensorPtr merged;
    for (std::int64_t h = 0; h < cfg.n_heads; ++h) {
        TensorPtr qh = g.slice_cols(q, h * dk, (h + 1) * dk);
        TensorPtr kh = g.slice_cols(k, h * dk, (h + 1) * dk);
        TensorPtr vh = g.slice_cols(v, h * dk, (h + 1) * dk);
        TensorPtr scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dk);
        TensorPtr att = g.matmul(g.softmax_rows(scores), vh);
        merged = merged ? g.concat_cols(merged, att) : att;
    }
    return g.matmul(merged, adapted(g, w.wo, adapters ? &adapters->o : nullptr));
}

TensorPtr project_variates(Graph& g, const TensorPtr& window, const EmbedWeights& w,
                           const BackboneConfig& cfg) {
    if (window->rows() != cfg.L) {
        throw std::invalid_argument("embed: window has " + std::to_string(window->rows()) +
                                    " rows, lookback is " + std::to_string(cfg.L));
    }
    return g.add_row(g.matmul(g.transpose(window), w.w), w.b);
}

TensorPtr embed_variates(Graph& g, const TensorPtr& window, const EmbedWeights& w,
                         const BackboneConfig& cfg) {
    return multi_head_attention(g, project_variates(g, window, w, cfg), w.attn, cfg);
}

EncoderResult encoder_forward(Graph& g, const TensorPtr& tokens, const BackboneWeights& w,
                              const BackboneConfig& cfg, const LoraSet* adapters) {
    if (tokens->cols() != cfg.M) {
        throw std::invalid_argument("encoder: token width " + std::to_string(tokens->cols()) +
                                    " does not match model width " + std::to_string(cfg.M));
    }
    if (adapters && static_cast<std::int64_t>(adapters->size()) != cfg.n_layers) {
        throw ConfigError("encoder: adapter count " + std::to_string(adapters->size()) +
                          " does not match depth " + std::to_string(cfg.n_layers));
    }

    EncoderResult result;
    TensorPtr x = tokens;
    for (std::int64_t m = 0; m < cfg.n_layers; ++m) {
        const BlockWeights& blk = w.blocks[static_cast<std::size_t>(m)];
        const BlockAdapters* blk_adapters =
            adapters ? &(*adapters)[static_cast<std::size_t>(m)] : nullptr;

        TensorPtr a = g.layer_norm_rows(x, blk.ln1_g, blk.ln1_b);
        x = g.add(x, multi_head_attention(g, a, blk.attn, cfg, blk_adapters));

        TensorPtr h = g.layer_norm_rows(x, blk.ln2_g, blk.ln2_b);
        TensorPtr ffn = g.add_row(
            g.matmul(g.gelu(g.add_row(g.matmul(h, blk.ffn_w1), blk.ffn_b1)), blk.ffn_w2), blk.ffn_b2);
        x = g.add(x, ffn);

        result.trace.pooled.push_back(g.mean_pool_rows(x));
    }
    result.tokens = g.layer_norm_rows(x, w.ln_f_g, w.ln_f_b);
    return result;
}

TensorPtr forecast_head(Graph& g, const TensorPtr& tokens, const HeadWeights& w) {
    return g.transpose(g.add_row(g.matmul(tokens, w.w), w.b));
}

BackboneWeights init_pretrained(std::uint64_t seed, const BackboneConfig& cfg, bool trainable) {
    cfg.validate();
    Rng rng(seed);
    const double sd = 0.02;
    BackboneWeights w;
    for (std::int64_t m = 0; m < cfg.n_layers; ++m) {
        BlockWeights blk;
        blk.ln1_g = Tensor::full({1, cfg.M}, 1.0, trainable);
        blk.ln1_b = Tensor::zeros({1, cfg.M}, trainable);
        blk.ln2_g = Tensor::full({1, cfg.M}, 1.0, trainable);
        blk.ln2_b = Tensor::zeros({1, cfg.M}, trainable);
        blk.attn.wq = gaussian_matrix(rng, cfg.M, cfg.M, sd, trainable);
        blk.attn.wk = gaussian_matrix(rng, cfg.M, cfg.M, sd, trainable);
        blk.attn.wv = gaussian_matrix(rng, cfg.M, cfg.M, sd, trainable);
        blk.attn.wo = gaussian_matrix(rng, cfg.M, cfg.M, sd, trainable);
        blk.ffn_w1 = gaussian_matrix(rng, cfg.M, cfg.ffn_mult * cfg.M, sd, trainable);
        blk.ffn_b1 = Tensor::zeros({1, cfg.ffn_mult * cfg.M}, trainable);
        blk.ffn_w2 = gaussian_matrix(rng, cfg.ffn_mult * cfg.M, cfg.M, sd, trainable);
        blk.ffn_b2 = Tensor::zeros({1, cfg.M}, trainable);
        w.blocks.push_back(std::move(blk));
    }
    w.ln_f_g = Tensor::full({1, cfg.M}, 1.0, trainable);
    w.ln_f_b = Tensor::zeros({1, cfg.M}, trainable);
    return w;
}

EmbedWeights init_embed(std::uint64_t seed, const BackboneConfig& cfg, bool trainable) {
    cfg.validate();
    Rng rng(seed);
    EmbedWeights w;
    w.w = gaussian_matrix(rng, cfg.L, cfg.M, 1.0 / std::sqrt(static_cast<double>(cfg.L)), trainable);
    w.b = Tensor::zeros({1, cfg.M}, trainable);
    w.attn.wq = gaussian_matrix(rng, cfg.M, cfg.M, 0.02, trainable);
    w.attn.wk = gaussian_matrix(rng, cfg.M, cfg.M, 0.02, trainable);
    w.attn.wv = gaussian_matrix(rng, cfg.M, cfg.M, 0.02, trainable);
    w.attn.wo = gaussian_matrix(rng, cfg.M, cfg.M, 0.02, trainable);
    return w;
}

HeadWeights init_head(std::uint64_t seed, const BackboneConfig& cfg, std::int64_t horizon,
                      bool trainable) {
    if (horizon < 1) throw ConfigError("head: horizon must be >= 1");
    Rng rng(seed);
    HeadWeights w;
    w.w = gaussian_matrix(rng, cfg.M, horizon, 1.0 / std::sqrt(static_cast<double>(cfg.M)), trainable);
    w.b = Tensor::zeros({1, horizon}, trainable);
    return w;
}

LoraSet init_lora(std::uint64_t seed, const BackboneConfig& cfg, std::int64_t rank, double scale,
                  bool trainable) {
    if (rank < 0) throw ConfigError("lora: rank must be >= 0");
    if (rank > cfg.M) {
        throw ConfigError("lora: rank " + std::to_string(rank) + " exceeds model width " +
                          std::to_string(cfg.M));
    }
    Rng rng(seed);
    LoraSet set;
    for (std::int64_t m = 0; m < cfg.n_layers; ++m) {
        BlockAdapters blk;
        for (LoraAdapter* ad : {&blk.q, &blk.k, &blk.v, &blk.o}) {
            ad->rank = rank;
            ad->scale = scale;
            if (rank > 0) {
                // A starts small and Gaussian, B at zero: the initial delta is exactly zero.
                ad->a = gaussian_matrix(rng, rank, cfg.M, 0.02, trainable);
                ad->b = Tensor::zeros({cfg.M, rank}, trainable);
            }
        }
        set.push_back(std::move(blk));
    }
    return set;
}

}  // namespace tstcd
