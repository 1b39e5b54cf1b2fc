// SPDX-License-Identifier: Apache-2.0
//
// Distillation losses: per-layer InfoNCE with cosine similarity and in-batch
// negatives, the decay-weighted feature loss, entropic optimal transport of
// the two towers' outputs solved by log-domain Sinkhorn, the supervised task
// losses, and their weighted total.
//
// The OT objective is the standard entropic form
//     <P, W> - mu * H(P) + mu * log(n*m)
// with H(P) = -sum P log P; the log(n*m) shift makes identical point clouds
// with zero cost score exactly zero. By default the transport plan is frozen
// at its converged value and gradients reach the outputs only through the
// cost matrix; set unrolled to differentiate through the iterations instead.
#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace tstcd {

TensorPtr info_nce(Graph& g, const TensorPtr& f_time, const TensorPtr& f_text, double tau);

struct FeatureLossResult {
    TensorPtr total;                    // scalar on the tape
    std::vector<TensorPtr> per_layer;   // InfoNCE scalar per layer
};

// Sum over layers m = 1..n of gamma^(n-m) * InfoNCE_m: deeper layers keep
// weight 1, earlier layers are decayed.
FeatureLossResult feature_loss(Graph& g, const std::vector<TensorPtr>& time_layers,
                               const std::vector<TensorPtr>& text_layers, double gamma, double tau);

struct TransportPlan {
    TensorPtr plan;          // n x m, nonnegative, constant (no gradient)
    std::vector<double> a;   // source marginal
    std::vector<double> b;   // target marginal
    int iterations_run = 0;
    bool converged = false;
    double cost = 0.0;  // <P, W>
};

// Log-domain Sinkhorn on the kernel exp(-W/mu). Runs until the plan's
// marginal violation drops below tol or max_iters is reached.
TransportPlan sinkhorn(const TensorPtr& cost, const std::vector<double>& a,
                       const std::vector<double>& b, double mu, int max_iters, double tol);

enum class OtCost { SqEuclidean, Absolute };
enum class OtAxis { Variate, Horizon };

struct OtOptions {
    double mu = 0.1;
    int iters = 100;
    double tol = 1e-9;
    OtCost cost = OtCost::SqEuclidean;
    OtAxis axis = OtAxis::Variate;
    bool unrolled = false;
};

// Entropic OT loss between two H x P forecasts with uniform marginals over
// the chosen axis.
TensorPtr ot_loss(Graph& g, const TensorPtr& y_time, const TensorPtr& y_text,
                  const OtOptions& options);

enum class TaskLossKind { SmoothL1, Smape, Mse };

TensorPtr task_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target, TaskLossKind kind);

// total = task + alpha * feature + beta * ot, in exactly that association.
TensorPtr total_loss(Graph& g, const TensorPtr& task, const TensorPtr& feature, const TensorPtr& ot,
                     double alpha, double beta);

struct LossBreakdown {
    double task = 0.0;
    std::vector<double> feature_per_layer;
    double feature = 0.0;
    double ot = 0.0;
    double total = 0.0;
    double alpha = 0.0, beta = 0.0, gamma = 0.0, tau = 0.0, mu = 0.0;
};

}  // namespace tstcd
