// SPDX-License-Identifier: Apache-2.0
//
// Principal embedding extraction: Householder QR of the transposed vocabulary
// embedding yields orthonormal feature-space directions. The decomposition is
// taken on D^T (M x |A|) so the extracted rows live in the model's M-dim
// feature space; taking QR of D itself would produce |A|-dim columns, which
// cannot span that space.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tensor.hpp"

namespace tstcd {

struct PrincipalEmbedding {
    TensorPtr dhat;                       // d x M, orthonormal rows
    std::int64_t rank = 0;                // detected or requested d
    std::int64_t numerical_rank = 0;      // rank detected from |R_ii| > rank_tol * |R_00|
    bool requested_exceeds_rank = false;  // d was given and exceeds numerical rank;
                                          // extra rows come from the orthonormal complement
};

struct QrReduceOptions {
    std::optional<std::int64_t> d;  // requested subspace size; detected when absent
    double rank_tol = 1e-10;
    bool pivoted = false;  // column pivoting for adversarial rank detection
};

// vocab: |A| x M embedding dictionary (as a plain row-major buffer).
PrincipalEmbedding qr_reduce(const std::vector<double>& vocab, std::int64_t n_words,
                             std::int64_t width, const QrReduceOptions& options = {});

PrincipalEmbedding qr_reduce(const TensorPtr& vocab, const QrReduceOptions& options = {});

// Seeded Gaussian stand-in vocabulary of |A| x M.
TensorPtr make_synthetic_vocab(std::uint64_t seed, std::int64_t n_words, std::int64_t width);

// Plain CSV import/export of embedding matrices (no header) for inspection.
void save_matrix_csv(const TensorPtr& matrix, const std::string& path);
TensorPtr load_matrix_csv(const std::string& path);

}  // namespace tstcd
