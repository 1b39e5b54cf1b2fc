// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensors with reverse-mode automatic differentiation.
//
// A Graph is a define-by-run tape: every operation appends one node holding
// the adjoint closure, so the record is topologically ordered by
// construction. Graph::backward walks the tape in reverse and accumulates
// gradients into every tensor that requires them. Graphs are cheap and are
// rebuilt for each forward pass, which lets ablation switches change the
// computation freely.
//
// Storage is row-major, 64-bit floats throughout. Most operations are
// defined on 2-D tensors; scalars are 1x1.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tstcd {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

class Tensor {
public:
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // same length as data when requires_grad

    Tensor(std::vector<std::int64_t> shape_, std::vector<double> data_, bool requires_grad_);

    static TensorPtr zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
    static TensorPtr full(std::vector<std::int64_t> shape, double value, bool requires_grad = false);
    static TensorPtr from(std::vector<std::int64_t> shape, std::vector<double> values,
                          bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    bool is_matrix() const { return shape.size() == 2; }
    std::int64_t rows() const;
    std::int64_t cols() const;

    double at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * cols() + j)]; }
    double& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * cols() + j)]; }

    // Value of a 1x1 tensor.
    double item() const;

    void zero_grad();
    bool all_finite() const;
    std::string shape_str() const;
};

std::string shape_to_string(const std::vector<std::int64_t>& shape);

// Reverse-mode tape. Operations validate shapes, compute the forward value
// and, when any input requires gradients, record the adjoint closure.
class Graph {
public:
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr transpose(const TensorPtr& a);

    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr scale(const TensorPtr& a, double c);
    TensorPtr add_row(const TensorPtr& a, const TensorPtr& row);  // m x n + 1 x n
    TensorPtr add_col(const TensorPtr& a, const TensorPtr& col);  // m x n + m x 1

    TensorPtr sigmoid(const TensorPtr& a);
    TensorPtr gelu(const TensorPtr& a);
    TensorPtr exp(const TensorPtr& a);
    TensorPtr log(const TensorPtr& a);  // requires positive entries

    TensorPtr softmax_rows(const TensorPtr& a);
    TensorPtr logsumexp_rows(const TensorPtr& a);  // m x n -> m x 1
    TensorPtr logsumexp_cols(const TensorPtr& a);  // m x n -> 1 x n
    TensorPtr layer_norm_rows(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias,
                              double eps = 1e-5);

    TensorPtr mean_pool_rows(const TensorPtr& a);  // m x n -> 1 x n
    TensorPtr sum(const TensorPtr& a);             // -> 1 x 1
    TensorPtr mean(const TensorPtr& a);            // -> 1 x 1

    TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
    TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
    TensorPtr slice_cols(const TensorPtr& a, std::int64_t c0, std::int64_t c1);
    TensorPtr diag(const TensorPtr& a);  // m x m -> m x 1

    // Rows scaled to unit L2 norm; throws on a zero-norm row.
    TensorPtr rows_normalize(const TensorPtr& a);

    // W[i][j] = squared Euclidean distance between column i of a and column j of b.
    TensorPtr pairwise_sqdist_cols(const TensorPtr& a, const TensorPtr& b);
    // W[i][j] = L1 distance between column i of a and column j of b.
    TensorPtr pairwise_absdist_cols(const TensorPtr& a, const TensorPtr& b);

    // Scalar losses, mean-reduced over all elements.
    TensorPtr smooth_l1_loss(const TensorPtr& pred, const TensorPtr& target);
    TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target);
    TensorPtr smape_loss(const TensorPtr& pred, const TensorPtr& target);

    // Seeds the scalar root with gradient 1 and runs every recorded adjoint
    // in reverse order. Leaf gradients must be zeroed by the caller first.
    void backward(const TensorPtr& root);

    // Number of forward operations executed on this graph (recorded or not).
    std::size_t ops_executed() const { return ops_executed_; }
    std::size_t nodes_recorded() const { return nodes_.size(); }

private:
    struct Node {
        std::function<void()> backprop;
    };
    std::vector<Node> nodes_;
    std::size_t ops_executed_ = 0;

    TensorPtr make_result(std::vector<std::int64_t> shape, std::vector<double> values,
                          bool requires_grad);
    void record(std::function<void()> fn) { nodes_.push_back(Node{std::move(fn)}); }
};

struct GradCheckOptions {
    double epsilon = 1e-5;      // central-difference step, valid range [1e-6, 1e-4]
    double tolerance = 1e-6;    // max relative error allowed
    int max_coords = 200;       // coordinates sampled across all parameters
    std::uint64_t seed = 0;     // sampling seed
    double denom_floor = 1e-6;  // floor of the relative-error denominator
};

struct GradCheckWorst {
    std::string param;
    std::int64_t index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    int coords_checked = 0;
    bool passed = true;
    GradCheckWorst worst;
};

using ScalarFn = std::function<TensorPtr(Graph&)>;

// Compares the reverse-mode gradient of f with central finite differences on
// a sampled subset of parameter coordinates. f must rebuild the forward pass
// from the current parameter values on every call and return a 1x1 tensor.
GradCheckReport grad_check(const ScalarFn& f,
                           const std::vector<std::pair<std::string, TensorPtr>>& params,
                           const GradCheckOptions& options = {});

}  // namespace tstcd
