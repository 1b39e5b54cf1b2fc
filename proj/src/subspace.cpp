// SPDX-License-Identifier: Apache-2.0

#include "subspace.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace tstcd {

namespace {

// Householder QR of the M x N matrix stored row-major in `a`, optionally with
// column pivoting. Overwrites `a` with R in the upper triangle and the
// reflector vectors below the diagonal; `betas` gets the reflector scales.
void householder_qr(std::vector<double>& a, std::int64_t m, std::int64_t n, std::vector<double>& betas,
                    std::vector<std::int64_t>* pivot) {
    const std::int64_t steps = std::min(m, n);
    betas.assign(static_cast<std::size_t>(steps), 0.0);

    std::vector<double> col_norms;
    if (pivot) {
        pivot->resize(static_cast<std::size_t>(n));
        std::iota(pivot->begin(), pivot->end(), 0);
        col_norms.assign(static_cast<std::size_t>(n), 0.0);
        for (std::int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::int64_t i = 0; i < m; ++i) {
                const double v = a[static_cast<std::size_t>(i * n + j)];
                s += v * v;
            }
            col_norms[static_cast<std::size_t>(j)] = s;
        }
    }

    for (std::int64_t k = 0; k < steps; ++k) {
        if (pivot) {
            std::int64_t best = k;
            for (std::int64_t j = k + 1; j < n; ++j) {
                if (col_norms[static_cast<std::size_t>(j)] > col_norms[static_cast<std::size_t>(best)]) {
                    best = j;
                }
            }
            if (best != k) {
                for (std::int64_t i = 0; i < m; ++i) {
                    std::swap(a[static_cast<std::size_t>(i * n + k)],
                              a[static_cast<std::size_t>(i * n + best)]);
                }
                std::swap(col_norms[static_cast<std::size_t>(k)], col_norms[static_cast<std::size_t>(best)]);
                std::swap((*pivot)[static_cast<std::size_t>(k)], (*pivot)[static_cast<std::size_t>(best)]);
            }
        }

        // Reflector for column k, rows k..m-1.
        double norm_sq = 0.0;
        for (std::int64_t i = k; i < m; ++i) {
            const double v = a[static_cast<std::size_t>(i * n + k)];
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm == 0.0) {
            betas[static_cast<std::size_t>(k)] = 0.0;
            continue;
        }
        const double akk = a[static_cast<std::size_t>(k * n + k)];
        const double alpha = (akk >= 0.0) ? -norm : norm;
        // v = x - alpha*e1, stored in place below the diagonal with v_k implicit.
        const double vk = akk - alpha;
        double vnorm_sq = vk * vk;
        for (std::int64_t i = k + 1; i < m; ++i) {
            const double v = a[static_cast<std::size_t>(i * n + k)];
            vnorm_sq += v * v;
        }
        if (vnorm_sq == 0.0) {
            betas[static_cast<std::size_t>(k)] = 0.0;
            continue;
        }
        const double beta = 2.0 / vnorm_sq;

        // Apply H = I - beta*v*v^T to the trailing columns.
        for (std::int64_t j = k + 1; j < n; ++j) {
            double dot = vk * a[static_cast<std::size_t>(k * n + j)];
            for (std::int64_t i = k + 1; i < m; ++i) {
                dot += a[static_cast<std::size_t>(i * n + k)] * a[static_cast<std::size_t>(i * n + j)];
            }
            const double f = beta * dot;
            a[static_cast<std::size_t>(k * n + j)] -= f * vk;
            for (std::int64_t i = k + 1; i < m; ++i) {
                a[static_cast<std::size_t>(i * n + j)] -= f * a[static_cast<std::size_t>(i * n + k)];
            }
        }
        a[static_cast<std::size_t>(k * n + k)] = alpha;
        // Store v (minus its implicit head) below the diagonal, normalized by vk
        // so the head is exactly 1.
        for (std::int64_t i = k + 1; i < m; ++i) {
            a[static_cast<std::size_t>(i * n + k)] /= vk;
        }
        betas[static_cast<std::size_t>(k)] = beta * vk * vk;

        if (pivot) {
            for (std::int64_t j = k + 1; j < n; ++j) {
                const double r = a[static_cast<std::size_t>(k * n + j)];
                col_norms[static_cast<std::size_t>(j)] = std::max(0.0, col_norms[static_cast<std::size_t>(j)] - r * r);
            }
        }
    }
}

// Accumulate the first `d` columns of Q (M x d) from the stored reflectors.
std::vector<double> build_q_columns(const std::vector<double>& a, std::int64_t m, std::int64_t n,
                                    const std::vector<double>& betas, std::int64_t d) {
    const std::int64_t steps = std::min(m, n);
    std::vector<double> q(static_cast<std::size_t>(m * d), 0.0);
    for (std::int64_t j = 0; j < d; ++j) q[static_cast<std::size_t>(j * d + j)] = 1.0;

    // Q = H_0 H_1 ... H_{s-1}; apply reflectors in reverse to the identity block.
    for (std::int64_t k = steps - 1; k >= 0; --k) {
        const double beta = betas[static_cast<std::size_t>(k)];
        if (beta == 0.0) continue;
        for (std::int64_t j = 0; j < d; ++j) {
            // dot = v^T q_col, with v = [1; a[k+1..m-1, k]] at rows k..m-1
            double dot = q[static_cast<std::size_t>(k * d + j)];
            for (std::int64_t i = k + 1; i < m; ++i) {
                dot += a[static_cast<std::size_t>(i * n + k)] * q[static_cast<std::size_t>(i * d + j)];
            }
            const double f = beta * dot;
            q[static_cast<std::size_t>(k * d + j)] -= f;
            for (std::int64_t i = k + 1; i < m; ++i) {
                q[static_cast<std::size_t>(i * d + j)] -= f * a[static_cast<std::size_t>(i * n + k)];
            }
        }
    }
    return q;
}

}  // namespace

PrincipalEmbedding qr_reduce(const std::vector<double>& vocab, std::int64_t n_words,
                             std::int64_t width, const QrReduceOptions& options) {
    if (n_words < 1 || width < 1) throw ConfigError("qr_reduce: dictionary must be at least 1x1");
    if (static_cast<std::int64_t>(vocab.size()) != n_words * width) {
        throw ConfigError("qr_reduce: buffer length does not match dimensions");
    }
    if (!(options.rank_tol > 0.0)) throw ConfigError("qr_reduce: rank_tol must be positive");
    const std::int64_t max_d = std::min(n_words, width);
    if (options.d && (*options.d < 1 || *options.d > max_d)) {
        throw ConfigError("qr_reduce: requested d=" + std::to_string(*options.d) +
                          " outside [1, " + std::to_string(max_d) + "]");
    }

    // Work on D^T: width x n_words.
    const std::int64_t m = width, n = n_words;
    std::vector<double> a(static_cast<std::size_t>(m * n));
    for (std::int64_t i = 0; i < n_words; ++i)
        for (std::int64_t j = 0; j < width; ++j)
            a[static_cast<std::size_t>(j * n + i)] = vocab[static_cast<std::size_t>(i * width + j)];

    std::vector<double> betas;
    std::vector<std::int64_t> pivot;
    householder_qr(a, m, n, betas, options.pivoted ? &pivot : nullptr);

    // Numerical rank: count diagonal entries of R above rank_tol * |R_00|.
    const std::int64_t steps = std::min(m, n);
    const double r00 = std::fabs(a[0]);
    std::int64_t num_rank = 0;
    if (r00 > 0.0) {
        for (std::int64_t k = 0; k < steps; ++k) {
            if (std::fabs(a[static_cast<std::size_t>(k * n + k)]) > options.rank_tol * r00) ++num_rank;
        }
    }

    PrincipalEmbedding result;
    result.numerical_rank = num_rank;
    if (options.d) {
        result.rank = *options.d;
        result.requested_exceeds_rank = (*options.d > num_rank);
    } else {
        if (num_rank == 0) throw NumericError("qr_reduce: zero-rank dictionary");
        result.rank = num_rank;
    }

    const std::int64_t d = result.rank;
    std::vector<double> q = build_q_columns(a, m, n, betas, d);

    // D-hat rows are Q columns transposed; fix each row's sign so its first
    // nonzero entry is positive, for deterministic output.
    std::vector<double> dhat(static_cast<std::size_t>(d * width));
    for (std::int64_t r = 0; r < d; ++r) {
        double sign = 1.0;
        for (std::int64_t j = 0; j < width; ++j) {
            const double v = q[static_cast<std::size_t>(j * d + r)];
            if (std::fabs(v) > 1e-12) {
                sign = (v < 0.0) ? -1.0 : 1.0;
                break;
            }
        }
        for (std::int64_t j = 0; j < width; ++j) {
            dhat[static_cast<std::size_t>(r * width + j)] = sign * q[static_cast<std::size_t>(j * d + r)];
        }
    }
    result.dhat = Tensor::from({d, width}, std::move(dhat), false);
    return result;
}

PrincipalEmbedding qr_reduce(const TensorPtr& vocab, const QrReduceOptions& options) {
    return qr_reduce(vocab->data, vocab->rows(), vocab->cols(), options);
}

TensorPtr make_synthetic_vocab(std::uint64_t seed, std::int64_t n_words, std::int64_t width) {
    Rng rng(seed);
    std::vector<double> d(static_cast<std::size_t>(n_words * width));
    for (auto& v : d) v = rng.gaussian(0.0, 1.0);
    return Tensor::from({n_words, width}, std::move(d), false);
}

void save_matrix_csv(const TensorPtr& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[48];
    for (std::int64_t i = 0; i < matrix->rows(); ++i) {
        for (std::int64_t j = 0; j < matrix->cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", matrix->at(i, j));
            if (j) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

TensorPtr load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<double> values;
    std::int64_t rows = 0, cols = -1;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        std::int64_t count = 0;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw ParseError(path + ": line " + std::to_string(rows) + ": cannot parse \"" +
                                 cell + "\"");
            }
            values.push_back(v);
            ++count;
        }
        if (cols < 0) cols = count;
        if (count != cols) {
            throw ParseError(path + ": line " + std::to_string(rows) + " has " +
                             std::to_string(count) + " cells, expected " + std::to_string(cols));
        }
    }
    if (rows == 0) throw ParseError(path + ": empty matrix");
    return Tensor::from({rows, cols}, std::move(values), false);
}

}  // namespace tstcd
