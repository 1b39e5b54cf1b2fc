// SPDX-License-Identifier: Apache-2.0

#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "errors.hpp"

namespace tstcd {

namespace {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::int64_t> shape_, std::vector<double> data_, bool requires_grad_)
    : shape(std::move(shape_)), data(std::move(data_)), requires_grad(requires_grad_) {
    if (shape.empty() || shape.size() > 3) {
        throw std::invalid_argument("tensor rank must be 1, 2 or 3, got shape " + shape_to_string(shape));
    }
    for (std::int64_t d : shape) {
        if (d < 1) throw std::invalid_argument("tensor dimensions must be >= 1, got " + shape_to_string(shape));
    }
    if (shape_product(shape) != static_cast<std::int64_t>(data.size())) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_to_string(shape));
    }
    if (requires_grad) grad.assign(data.size(), 0.0);
}

TensorPtr Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(shape_product(shape)), 0.0);
    return std::make_shared<Tensor>(std::move(shape), std::move(d), requires_grad);
}

TensorPtr Tensor::full(std::vector<std::int64_t> shape, double value, bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(shape_product(shape)), value);
    return std::make_shared<Tensor>(std::move(shape), std::move(d), requires_grad);
}

TensorPtr Tensor::from(std::vector<std::int64_t> shape, std::vector<double> values, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return std::make_shared<Tensor>(std::vector<std::int64_t>{1, 1}, std::vector<double>{value},
                                    requires_grad);
}

std::int64_t Tensor::rows() const {
    if (!is_matrix()) throw std::invalid_argument("expected a matrix, got shape " + shape_str());
    return shape[0];
}

std::int64_t Tensor::cols() const {
    if (!is_matrix()) throw std::invalid_argument("expected a matrix, got shape " + shape_str());
    return shape[1];
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item() requires a 1x1 tensor, got shape " + shape_str());
    return data[0];
}

void Tensor::zero_grad() {
    if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

TensorPtr Graph::make_result(std::vector<std::int64_t> shape, std::vector<double> values,
                             bool requires_grad) {
    ++ops_executed_;
    return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
    const std::int64_t m = a->rows(), k = a->cols(), k2 = b->rows(), n = b->cols();
    if (k != k2) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " + a->shape_str() + " vs " +
                                    b->shape_str());
    }
    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = a->data[static_cast<std::size_t>(i * k + p)];
            if (av == 0.0) continue;
            const std::size_t brow = static_cast<std::size_t>(p * n);
            const std::size_t orow = static_cast<std::size_t>(i * n);
            for (std::int64_t j = 0; j < n; ++j) {
                out[orow + static_cast<std::size_t>(j)] += av * b->data[brow + static_cast<std::size_t>(j)];
            }
        }
    }
    const bool needs = a->requires_grad || b->requires_grad;
    TensorPtr result = make_result({m, n}, std::move(out), needs);
    if (needs) {
        record([a, b, result, m, k, n]() {
            if (a->requires_grad) {
                // da = g . b^T
                for (std::int64_t i = 0; i < m; ++i) {
                    for (std::int64_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::int64_t j = 0; j < n; ++j) {
                            acc += result->grad[static_cast<std::size_t>(i * n + j)] *
                                   b->data[static_cast<std::size_t>(p * n + j)];
                        }
                        a->grad[static_cast<std::size_t>(i * k + p)] += acc;
                    }
                }
            }
            if (b->requires_grad) {
                // db = a^T . g
                for (std::int64_t p = 0; p < k; ++p) {
                    for (std::int64_t j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (std::int64_t i = 0; i < m; ++i) {
                            acc += a->data[static_cast<std::size_t>(i * k + p)] *
                                   result->grad[static_cast<std::size_t>(i * n + j)];
                        }
                        b->grad[static_cast<std::size_t>(p * n + j)] += acc;
                    }
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::transpose(const TensorPtr& a) {
    const std::int64_t m = a->rows(), n = a->cols();
    std::vector<double> out(static_cast<std::size_t>(m * n));
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j * m + i)] = a->data[static_cast<std::size_t>(i * n + j)];
    TensorPtr result = make_result({n, m}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, m, n]() {
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j)
                    a->grad[static_cast<std::size_t>(i * n + j)] +=
                        result->grad[static_cast<std::size_t>(j * m + i)];
        });
    }
    return result;
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw std::invalid_argument("add: shape mismatch, " + a->shape_str() + " vs " + b->shape_str());
    }
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
    const bool needs = a->requires_grad || b->requires_grad;
    TensorPtr result = make_result(a->shape, std::move(out), needs);
    if (needs) {
        record([a, b, result]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i) a->grad[i] += result->grad[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i) b->grad[i] += result->grad[i];
        });
    }
    return result;
}

TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw std::invalid_argument("sub: shape mismatch, " + a->shape_str() + " vs " + b->shape_str());
    }
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
    const bool needs = a->requires_grad || b->requires_grad;
    TensorPtr result = make_result(a->shape, std::move(out), needs);
    if (needs) {
        record([a, b, result]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i) a->grad[i] += result->grad[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i) b->grad[i] -= result->grad[i];
        });
    }
    return result;
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw std::invalid_argument("mul: shape mismatch, " + a->shape_str() + " vs " + b->shape_str());
    }
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
    const bool needs = a->requires_grad || b->requires_grad;
    TensorPtr result = make_result(a->shape, std::move(out), needs);
    if (needs) {
        record([a, b, result]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i)
                    a->grad[i] += result->grad[i] * b->data[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i)
                    b->grad[i] += result->grad[i] * a->data[i];
        });
    }
    return result;
}

TensorPtr Graph::scale(const TensorPtr& a, double c) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * c;
    TensorPtr result = make_result(a->shape, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, c]() {
            for (std::size_t i = 0; i < result->grad.size(); ++i) a->grad[i] += c * result->grad[i];
        });
    }
    return result;
}

TensorPtr Graph::add_row(const TensorPtr& a, const TensorPtr& row) {
    const std::int64_t m = a->rows(), n = a->cols();
    if (row->rows() != 1 || row->cols() != n) {
        throw std::invalid_argument("add_row: expected 1x" + std::to_string(n) + " row, got " +
                                    row->shape_str());
    }
    std::vector<double> out(a->data.size());
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i * n + j)] =
                a->data[static_cast<std::size_t>(i * n + j)] + row->data[static_cast<std::size_t>(j)];
    const bool needs = a->requires_grad || row->requires_grad;
    TensorPtr result = make_result({m, n}, std::move(out), needs);
    if (needs) {
        record([a, row, result, m, n]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i) a->grad[i] += result->grad[i];
            if (row->requires_grad) {
                for (std::int64_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < m; ++i)
                        acc += result->grad[static_cast<std::size_t>(i * n + j)];
                    row->grad[static_cast<std::size_t>(j)] += acc;
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::add_col(const TensorPtr& a, const TensorPtr& col) {
    const std::int64_t m = a->rows(), n = a->cols();
    if (col->rows() != m || col->cols() != 1) {
        throw std::invalid_argument("add_col: expected " + std::to_string(m) + "x1 column, got " +
                                    col->shape_str());
    }
    std::vector<double> out(a->data.size());
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i * n + j)] =
                a->data[static_cast<std::size_t>(i * n + j)] + col->data[static_cast<std::size_t>(i)];
    const bool needs = a->requires_grad || col->requires_grad;
    TensorPtr result = make_result({m, n}, std::move(out), needs);
    if (needs) {
        record([a, col, result, m, n]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < result->grad.size(); ++i) a->grad[i] += result->grad[i];
            if (col->requires_grad) {
                for (std::int64_t i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (std::int64_t j = 0; j < n; ++j)
                        acc += result->grad[static_cast<std::size_t>(i * n + j)];
                    col->grad[static_cast<std::size_t>(i)] += acc;
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::sigmoid(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(a->data[i]);
    TensorPtr result = make_result(a->shape, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result]() {
            for (std::size_t i = 0; i < result->grad.size(); ++i) {
                const double s = result->data[i];
                a->grad[i] += result->grad[i] * s * (1.0 - s);
            }
        });
    }
    return result;
}

TensorPtr Graph::gelu(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a->data[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    TensorPtr result = make_result(a->shape, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result]() {
            for (std::size_t i = 0; i < result->grad.size(); ++i) {
                const double x = a->data[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                a->grad[i] += result->grad[i] * (cdf + x * pdf);
            }
        });
    }
    return result;
}

TensorPtr Graph::exp(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a->data[i]);
    TensorPtr result = make_result(a->shape, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result]() {
            for (std::size_t i = 0; i < result->grad.size(); ++i)
                a->grad[i] += result->grad[i] * result->data[i];
        });
    }
    return result;
}

TensorPtr Graph::log(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(a->data[i] > 0.0)) {
            throw NumericError("log: non-positive input " + std::to_string(a->data[i]) + " at flat index " +
                               std::to_string(i));
        }
        out[i] = std::log(a->data[i]);
    }
    TensorPtr result = make_result(a->shape, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result]() {
            for (std::size_t i = 0; i < result->grad.size(); ++i)
                a->grad[i] += result->grad[i] / a->data[i];
        });
    }
    return result;
}

TensorPtr Graph::softmax_rows(const TensorPtr& a) {
    const std::int64_t m = a->rows(), n = a->cols();
    std::vector<double> out(a->data.size());
    for (std::int64_t i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i * n);
        double mx = a->data[base];
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, a->data[base + static_cast<std::size_t>(j)]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double e = std::exp(a->data[base + static_cast<std::size_t>(j)] - mx);
            out[base + static_cast<std::size_t>(j)] = e;
            denom += e;
        }
        for (std::int64_t j = 0; j < n; ++j) out[base + static_cast<std::size_t>(j)] /= denom;
    }
    TensorPtr result = make_result({m, n}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, m, n]() {
            for (std::int64_t i = 0; i < m; ++i) {
                const std::size_t base = static_cast<std::size_t>(i * n);
                double dot = 0.0;
                for (std::int64_t j = 0; j < n; ++j) {
                    const std::size_t k = base + static_cast<std::size_t>(j);
                    dot += result->grad[k] * result->data[k];
                }
                for (std::int64_t j = 0; j < n; ++j) {
                    const std::size_t k = base + static_cast<std::size_t>(j);
                    a->grad[k] += result->data[k] * (result->grad[k] - dot);
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::logsumexp_rows(const TensorPtr& a) {
    const std::int64_t m = a->rows(), n = a->cols();
    std::vector<double> out(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i * n);
        double mx = a->data[base];
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, a->data[base + static_cast<std::size_t>(j)]);
        double acc = 0.0;
        for (std::int64_t j = 0; j < n; ++j) acc += std::exp(a->data[base + static_cast<std::size_t>(j)] - mx);
        out[static_cast<std::size_t>(i)] = mx + std::log(acc);
    }
    TensorPtr result = make_result({m, 1}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, m, n]() {
            for (std::int64_t i = 0; i < m; ++i) {
                const double g = result->grad[static_cast<std::size_t>(i)];
                if (g == 0.0) continue;
                const double lse = result->data[static_cast<std::size_t>(i)];
                const std::size_t base = static_cast<std::size_t>(i * n);
                for (std::int64_t j = 0; j < n; ++j) {
                    const std::size_t k = base + static_cast<std::size_t>(j);
                    a->grad[k] += g * std::exp(a->data[k] - lse);
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::logsumexp_cols(const TensorPtr& a) {
    const std::int64_t m = a->rows(), n = a->cols();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
        double mx = a->data[static_cast<std::size_t>(j)];
        for (std::int64_t i = 1; i < m; ++i)
            mx = std::max(mx, a->data[static_cast<std::size_t>(i * n + j)]);
        double acc = 0.0;
        for (std::int64_t i = 0; i < m; ++i)
            acc += std::exp(a->data[static_cast<std::size_t>(i * n + j)] - mx);
        out[static_cast<std::size_t>(j)] = mx + std::log(acc);
    }
    TensorPtr result = make_result({1, n}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, m, n]() {
            for (std::int64_t j = 0; j < n; ++j) {
                const double g = result->grad[static_cast<std::size_t>(j)];
                if (g == 0.0) continue;
                const double lse = result->data[static_cast<std::size_t>(j)];
                for (std::int64_t i = 0; i < m; ++i) {
                    const std::size_t k = static_cast<std::size_t>(i * n + j);
                    a->grad[k] += g * std::exp(a->data[k] - lse);
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::layer_norm_rows(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias,
                                 double eps) {
    const std::int64_t m = a->rows(), n = a->cols();
    if (gain->rows() != 1 || gain->cols() != n || bias->rows() != 1 || bias->cols() != n) {
        throw std::invalid_argument("layer_norm_rows: gain/bias must be 1x" + std::to_string(n) + ", got " +
                                    gain->shape_str() + " and " + bias->shape_str());
    }
    std::vector<double> out(a->data.size());
    std::vector<double> xhat(a->data.size());
    std::vector<double> inv_sd(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i * n);
        double mu = 0.0;
        for (std::int64_t j = 0; j < n; ++j) mu += a->data[base + static_cast<std::size_t>(j)];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double d = a->data[base + static_cast<std::size_t>(j)] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double isd = 1.0 / std::sqrt(var + eps);
        inv_sd[static_cast<std::size_t>(i)] = isd;
        for (std::int64_t j = 0; j < n; ++j) {
            const std::size_t k = base + static_cast<std::size_t>(j);
            xhat[k] = (a->data[k] - mu) * isd;
            out[k] = gain->data[static_cast<std::size_t>(j)] * xhat[k] +
                     bias->data[static_cast<std::size_t>(j)];
        }
    }
    const bool needs = a->requires_grad || gain->requires_grad || bias->requires_grad;
    TensorPtr result = make_result({m, n}, std::move(out), needs);
    if (needs) {
        record([a, gain, bias, result, xhat = std::move(xhat), inv_sd = std::move(inv_sd), m, n]() {
            for (std::int64_t i = 0; i < m; ++i) {
                const std::size_t base = static_cast<std::size_t>(i * n);
                if (gain->requires_grad || bias->requires_grad) {
                    for (std::int64_t j = 0; j < n; ++j) {
                        const std::size_t k = base + static_cast<std::size_t>(j);
                        if (gain->requires_grad)
                            gain->grad[static_cast<std::size_t>(j)] += result->grad[k] * xhat[k];
                        if (bias->requires_grad)
                            bias->grad[static_cast<std::size_t>(j)] += result->grad[k];
                    }
                }
                if (a->requires_grad) {
                    // dxhat = g .* gain; dx = isd * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (std::int64_t j = 0; j < n; ++j) {
                        const std::size_t k = base + static_cast<std::size_t>(j);
                        const double dxh = result->grad[k] * gain->data[static_cast<std::size_t>(j)];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[k];
                    }
                    mean_dxhat /= static_cast<double>(n);
                    mean_dxhat_xhat /= static_cast<double>(n);
                    const double isd = inv_sd[static_cast<std::size_t>(i)];
                    for (std::int64_t j = 0; j < n; ++j) {
                        const std::size_t k = base + static_cast<std::size_t>(j);
                        const double dxh = result->grad[k] * gain->data[static_cast<std::size_t>(j)];
                        a->grad[k] += isd * (dxh - mean_dxhat - xhat[k] * mean_dxhat_xhat);
                    }
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::mean_pool_rows(const TensorPtr& a) {
    const std::int64_t m = a->rows(), n = a->cols();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j)] += a->data[static_cast<std::size_t>(i * n + j)];
    for (std::int64_t j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] /= static_cast<double>(m);
    TensorPtr result = make_result({1, n}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, m, n]() {
            const double inv = 1.0 / static_cast<double>(m);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j)
                    a->grad[static_cast<std::size_t>(i * n + j)] +=
                        result->grad[static_cast<std::size_t>(j)] * inv;
        });
    }
    return result;
}

TensorPtr Graph::sum(const TensorPtr& a) {
    double acc = 0.0;
    for (double v : a->data) acc += v;
    TensorPtr result = make_result({1, 1}, {acc}, a->requires_grad);
    if (a->requires_grad) {
        record([a, result]() {
            const double g = result->grad[0];
            for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
        });
    }
    return result;
}

TensorPtr Graph::mean(const TensorPtr& a) {
    double acc = 0.0;
    for (double v : a->data) acc += v;
    acc /= static_cast<double>(a->data.size());
    TensorPtr result = make_result({1, 1}, {acc}, a->requires_grad);
    if (a->requires_grad) {
        record([a, result]() {
            const double g = result->grad[0] / static_cast<double>(a->grad.size());
            for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
        });
    }
    return result;
}

TensorPtr Graph::concat_cols(const TensorPtr& a, const TensorPtr& b) {
    const std::int64_t m = a->rows(), p = a->cols(), q = b->cols();
    if (b->rows() != m) {
        throw std::invalid_argument("concat_cols: row counts disagree, " + a->shape_str() + " vs " +
                                    b->shape_str());
    }
    std::vector<double> out(static_cast<std::size_t>(m * (p + q)));
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < p; ++j)
            out[static_cast<std::size_t>(i * (p + q) + j)] = a->data[static_cast<std::size_t>(i * p + j)];
        for (std::int64_t j = 0; j < q; ++j)
            out[static_cast<std::size_t>(i * (p + q) + p + j)] =
                b->data[static_cast<std::size_t>(i * q + j)];
    }
    const bool needs = a->requires_grad || b->requires_grad;
    TensorPtr result = make_result({m, p + q}, std::move(out), needs);
    if (needs) {
        record([a, b, result, m, p, q]() {
            for (std::int64_t i = 0; i < m; ++i) {
                if (a->requires_grad)
                    for (std::int64_t j = 0; j < p; ++j)
                        a->grad[static_cast<std::size_t>(i * p + j)] +=
                            result->grad[static_cast<std::size_t>(i * (p + q) + j)];
                if (b->requires_grad)
                    for (std::int64_t j = 0; j < q; ++j)
                        b->grad[static_cast<std::size_t>(i * q + j)] +=
                            result->grad[static_cast<std::size_t>(i * (p + q) + p + j)];
            }
        });
    }
    return result;
}

TensorPtr Graph::concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts given");
    const std::int64_t n = parts[0]->cols();
    std::int64_t total = 0;
    bool needs = false;
    for (const auto& p : parts) {
        if (p->cols() != n) {
            throw std::invalid_argument("concat_rows: column counts disagree, " + parts[0]->shape_str() +
                                        " vs " + p->shape_str());
        }
        total += p->rows();
        needs = needs || p->requires_grad;
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total * n));
    for (const auto& p : parts) out.insert(out.end(), p->data.begin(), p->data.end());
    TensorPtr result = make_result({total, n}, std::move(out), needs);
    if (needs) {
        record([parts, result]() {
            std::size_t offset = 0;
            for (const auto& p : parts) {
                if (p->requires_grad) {
                    for (std::size_t i = 0; i < p->grad.size(); ++i)
                        p->grad[i] += result->grad[offset + i];
                }
                offset += p->data.size();
            }
        });
    }
    return result;
}

TensorPtr Graph::slice_cols(const TensorPtr& a, std::int64_t c0, std::int64_t c1) {
    const std::int64_t m = a->rows(), n = a->cols();
    if (c0 < 0 || c1 > n || c0 >= c1) {
        throw std::invalid_argument("slice_cols: invalid range [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") for " + a->shape_str());
    }
    const std::int64_t w = c1 - c0;
    std::vector<double> out(static_cast<std::size_t>(m * w));
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < w; ++j)
            out[static_cast<std::size_t>(i * w + j)] = a->data[static_cast<std::size_t>(i * n + c0 + j)];
    TensorPtr result = make_result({m, w}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, m, n, w, c0]() {
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < w; ++j)
                    a->grad[static_cast<std::size_t>(i * n + c0 + j)] +=
                        result->grad[static_cast<std::size_t>(i * w + j)];
        });
    }
    return result;
}

TensorPtr Graph::diag(const TensorPtr& a) {
    const std::int64_t m = a->rows();
    if (a->cols() != m) throw std::invalid_argument("diag: expected a square matrix, got " + a->shape_str());
    std::vector<double> out(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = a->at(i, i);
    TensorPtr result = make_result({m, 1}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, m]() {
            for (std::int64_t i = 0; i < m; ++i)
                a->grad[static_cast<std::size_t>(i * m + i)] += result->grad[static_cast<std::size_t>(i)];
        });
    }
    return result;
}

TensorPtr Graph::rows_normalize(const TensorPtr& a) {
    const std::int64_t m = a->rows(), n = a->cols();
    std::vector<double> out(a->data.size());
    std::vector<double> norms(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i * n);
        double ss = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double v = a->data[base + static_cast<std::size_t>(j)];
            ss += v * v;
        }
        const double norm = std::sqrt(ss);
        if (!(norm > 0.0)) {
            throw NumericError("rows_normalize: row " + std::to_string(i) + " has zero norm");
        }
        norms[static_cast<std::size_t>(i)] = norm;
        for (std::int64_t j = 0; j < n; ++j)
            out[base + static_cast<std::size_t>(j)] = a->data[base + static_cast<std::size_t>(j)] / norm;
    }
    TensorPtr result = make_result({m, n}, std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, result, norms = std::move(norms), m, n]() {
            for (std::int64_t i = 0; i < m; ++i) {
                const std::size_t base = static_cast<std::size_t>(i * n);
                double dot = 0.0;
                for (std::int64_t j = 0; j < n; ++j) {
                    const std::size_t k = base + static_cast<std::size_t>(j);
                    dot += result->grad[k] * result->data[k];
                }
                const double inv = 1.0 / norms[static_cast<std::size_t>(i)];
                for (std::int64_t j = 0; j < n; ++j) {
                    const std::size_t k = base + static_cast<std::size_t>(j);
                    a->grad[k] += (result->grad[k] - result->data[k] * dot) * inv;
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::pairwise_sqdist_cols(const TensorPtr& a, const TensorPtr& b) {
    const std::int64_t h = a->rows(), p = a->cols(), q = b->cols();
    if (b->rows() != h) {
        throw std::invalid_argument("pairwise_sqdist_cols: row counts disagree, " + a->shape_str() +
                                    " vs " + b->shape_str());
    }
    std::vector<double> out(static_cast<std::size_t>(p * q), 0.0);
    for (std::int64_t i = 0; i < p; ++i) {
        for (std::int64_t j = 0; j < q; ++j) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < h; ++t) {
                const double d = a->data[static_cast<std::size_t>(t * p + i)] -
                                 b->data[static_cast<std::size_t>(t * q + j)];
                acc += d * d;
            }
            out[static_cast<std::size_t>(i * q + j)] = acc;
        }
    }
    const bool needs = a->requires_grad || b->requires_grad;
    TensorPtr result = make_result({p, q}, std::move(out), needs);
    if (needs) {
        record([a, b, result, h, p, q]() {
            for (std::int64_t i = 0; i < p; ++i) {
                for (std::int64_t j = 0; j < q; ++j) {
                    const double g = result->grad[static_cast<std::size_t>(i * q + j)];
                    if (g == 0.0) continue;
                    for (std::int64_t t = 0; t < h; ++t) {
                        const double d = a->data[static_cast<std::size_t>(t * p + i)] -
                                         b->data[static_cast<std::size_t>(t * q + j)];
                        if (a->requires_grad)
                            a->grad[static_cast<std::size_t>(t * p + i)] += 2.0 * g * d;
                        if (b->requires_grad)
                            b->grad[static_cast<std::size_t>(t * q + j)] -= 2.0 * g * d;
                    }
                }
            }
        });
    }
    return result;
}

TensorPtr Graph::pairwise_absdist_cols(const TensorPtr& a, const TensorPtr& b) {
    const std::int64_t h = a->rows(), p = a->cols(), q = b->cols();
    if (b->rows() != h) {
        throw std::invalid_argument("pairwise_absdist_cols: row counts disagree, " + a->shape_str() +
                                    " vs " + b->shape_str());
    }
    std::vector<double> out(static_cast<std::size_t>(p * q), 0.0);
    for (std::int64_t i = 0; i < p; ++i)
        for (std::int64_t j = 0; j < q; ++j) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < h; ++t) {
                acc += std::fabs(a->data[static_cast<std::size_t>(t * p + i)] -
                                 b->data[static_cast<std::size_t>(t * q + j)]);
            }
            out[static_cast<std::size_t>(i * q + j)] = acc;
        }
    const bool needs = a->requires_grad || b->requires_grad;
    TensorPtr result = make_result({p, q}, std::move(out), needs);
    if (needs) {
        record([a, b, result, h, p, q]() {
            for (std::int64_t i = 0; i < p; ++i)
                for (std::int64_t j = 0; j < q; ++j) {
                    const double g = result->grad[static_cast<std::size_t>(i * q + j)];
                    if (g == 0.0) continue;
                    for (std::int64_t t = 0; t < h; ++t) {
                        const double d = a->data[static_cast<std::size_t>(t * p + i)] -
                                         b->data[static_cast<std::size_t>(t * q + j)];
                        const double s = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                        if (a->requires_grad) a->grad[static_cast<std::size_t>(t * p + i)] += g * s;
                        if (b->requires_grad) b->grad[static_cast<std::size_t>(t * q + j)] -= g * s;
                    }
                }
        });
    }
    return result;
}

TensorPtr Graph::smooth_l1_loss(const TensorPtr& pred, const TensorPtr& target) {
    if (pred->shape != target->shape) {
        throw std::invalid_argument("smooth_l1_loss: shape mismatch, " + pred->shape_str() + " vs " +
                                    target->shape_str());
    }
    const double n = static_cast<double>(pred->data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->data.size(); ++i) {
        const double e = pred->data[i] - target->data[i];
        const double ae = std::fabs(e);
        acc += (ae < 1.0) ? 0.5 * e * e : ae - 0.5;
    }
    const bool needs = pred->requires_grad || target->requires_grad;
    TensorPtr result = make_result({1, 1}, {acc / n}, needs);
    if (needs) {
        record([pred, target, result, n]() {
            const double g = result->grad[0] / n;
            for (std::size_t i = 0; i < pred->data.size(); ++i) {
                const double e = pred->data[i] - target->data[i];
                const double de = (std::fabs(e) < 1.0) ? e : (e > 0.0 ? 1.0 : -1.0);
                if (pred->requires_grad) pred->grad[i] += g * de;
                if (target->requires_grad) target->grad[i] -= g * de;
            }
        });
    }
    return result;
}

TensorPtr Graph::mse_loss(const TensorPtr& pred, const TensorPtr& target) {
    if (pred->shape != target->shape) {
        throw std::invalid_argument("mse_loss: shape mismatch, " + pred->shape_str() + " vs " +
                                    target->shape_str());
    }
    const double n = static_cast<double>(pred->data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->data.size(); ++i) {
        const double e = pred->data[i] - target->data[i];
        acc += e * e;
    }
    const bool needs = pred->requires_grad || target->requires_grad;
    TensorPtr result = make_result({1, 1}, {acc / n}, needs);
    if (needs) {
        record([pred, target, result, n]() {
            const double g = result->grad[0] / n;
            for (std::size_t i = 0; i < pred->data.size(); ++i) {
                const double e = pred->data[i] - target->data[i];
                if (pred->requires_grad) pred->grad[i] += 2.0 * g * e;
                if (target->requires_grad) target->grad[i] -= 2.0 * g * e;
            }
        });
    }
    return result;
}

TensorPtr Graph::smape_loss(const TensorPtr& pred, const TensorPtr& target) {
    if (pred->shape != target->shape) {
        throw std::invalid_argument("smape_loss: shape mismatch, " + pred->shape_str() + " vs " +
                                    target->shape_str());
    }
    constexpr double kEps = 1e-8;  // denominator floor, survives zero targets
    const double n = static_cast<double>(pred->data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->data.size(); ++i) {
        const double num = std::fabs(pred->data[i] - target->data[i]);
        const double den = std::max(std::fabs(target->data[i]) + std::fabs(pred->data[i]), kEps);
        acc += num / den;
    }
    const bool needs = pred->requires_grad || target->requires_grad;
    TensorPtr result = make_result({1, 1}, {200.0 * acc / n}, needs);
    if (needs) {
        record([pred, target, result, n]() {
            const double g = result->grad[0] * 200.0 / n;
            for (std::size_t i = 0; i < pred->data.size(); ++i) {
                const double p = pred->data[i], y = target->data[i];
                const double e = p - y;
                const double se = (e > 0.0) ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
                const double raw_den = std::fabs(y) + std::fabs(p);
                if (raw_den <= kEps) {
                    // floored denominator is constant
                    if (pred->requires_grad) pred->grad[i] += g * se / kEps;
                    if (target->requires_grad) target->grad[i] -= g * se / kEps;
                } else {
                    const double num = std::fabs(e);
                    const double sp = (p > 0.0) ? 1.0 : (p < 0.0 ? -1.0 : 0.0);
                    const double sy = (y > 0.0) ? 1.0 : (y < 0.0 ? -1.0 : 0.0);
                    if (pred->requires_grad)
                        pred->grad[i] += g * (se * raw_den - num * sp) / (raw_den * raw_den);
                    if (target->requires_grad)
                        target->grad[i] += g * (-se * raw_den - num * sy) / (raw_den * raw_den);
                }
            }
        });
    }
    return result;
}

void Graph::backward(const TensorPtr& root) {
    if (root->size() != 1) {
        throw std::invalid_argument("backward: root must be a scalar, got shape " + root->shape_str());
    }
    if (!root->requires_grad) return;
    root->grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backprop();
}

GradCheckReport grad_check(const ScalarFn& f,
                           const std::vector<std::pair<std::string, TensorPtr>>& params,
                           const GradCheckOptions& options) {
    if (options.epsilon < 1e-6 || options.epsilon > 1e-4) {
        throw std::invalid_argument("grad_check: epsilon must lie in [1e-6, 1e-4]");
    }
    auto eval = [&f]() {
        Graph g;
        TensorPtr out = f(g);
        const double v = out->item();
        if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
        return v;
    };

    // Analytic pass.
    std::vector<std::vector<double>> analytic(params.size());
    {
        Graph g;
        TensorPtr out = f(g);
        if (!std::isfinite(out->item())) throw NumericError("grad_check: function value is not finite");
        for (auto& [name, t] : params) t->zero_grad();
        g.backward(out);
        for (std::size_t p = 0; p < params.size(); ++p) analytic[p] = params[p].second->grad;
    }

    // Enumerate coordinates; sample without replacement when over budget.
    std::vector<std::pair<std::size_t, std::int64_t>> coords;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].second->requires_grad) continue;
        for (std::int64_t i = 0; i < params[p].second->size(); ++i) coords.emplace_back(p, i);
    }
    if (static_cast<int>(coords.size()) > options.max_coords) {
        std::mt19937_64 rng(options.seed);
        for (std::size_t i = 0; i < static_cast<std::size_t>(options.max_coords); ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, coords.size() - 1);
            std::swap(coords[i], coords[pick(rng)]);
        }
        coords.resize(static_cast<std::size_t>(options.max_coords));
    }

    GradCheckReport report;
    for (const auto& [p, idx] : coords) {
        Tensor& t = *params[p].second;
        const double saved = t.data[static_cast<std::size_t>(idx)];
        t.data[static_cast<std::size_t>(idx)] = saved + options.epsilon;
        const double fp = eval();
        t.data[static_cast<std::size_t>(idx)] = saved - options.epsilon;
        const double fm = eval();
        t.data[static_cast<std::size_t>(idx)] = saved;
        const double numeric = (fp - fm) / (2.0 * options.epsilon);
        const double a = analytic[p][static_cast<std::size_t>(idx)];
        const double denom = std::max({std::fabs(a), std::fabs(numeric), options.denom_floor});
        const double rel = std::fabs(a - numeric) / denom;
        ++report.coords_checked;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst = GradCheckWorst{params[p].first, idx, a, numeric};
        }
    }
    report.passed = report.max_rel_err <= options.tolerance;
    return report;
}

}  // namespace tstcd
