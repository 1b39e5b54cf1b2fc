// SPDX-License-Identifier: Apache-2.0

#include "losses.hpp"

#include <cmath>

#include "errors.hpp"

namespace tstcd {

namespace {

double lse(const double* v, std::int64_t n, std::int64_t stride) {
    double mx = v[0];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, v[i * stride]);
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += std::exp(v[i * stride] - mx);
    return mx + std::log(acc);
}

void check_marginal(const std::vector<double>& m, const char* name) {
    double total = 0.0;
    for (double v : m) {
        if (!(v > 0.0)) throw ConfigError(std::string("sinkhorn: marginal ") + name + " must be strictly positive");
        total += v;
    }
    if (std::fabs(total - 1.0) > 1e-8) {
        throw ConfigError(std::string("sinkhorn: marginal ") + name + " must sum to 1, got " +
                          std::to_string(total));
    }
}

}  // namespace

TensorPtr info_nce(Graph& g, const TensorPtr& f_time, const TensorPtr& f_text, double tau) {
    if (!(tau > 0.0)) throw ConfigError("info_nce: temperature must be positive");
    if (f_time->shape != f_text->shape) {
        throw std::invalid_argument("info_nce: feature shapes disagree, " + f_time->shape_str() +
                                    " vs " + f_text->shape_str());
    }
    TensorPtr fn = g.rows_normalize(f_time);
    TensorPtr gn = g.rows_normalize(f_text);
    TensorPtr sims = g.scale(g.matmul(fn, g.transpose(gn)), 1.0 / tau);
    return g.mean(g.sub(g.logsumexp_rows(sims), g.diag(sims)));
}

FeatureLossResult feature_loss(Graph& g, const std::vector<TensorPtr>& time_layers,
                               const std::vector<TensorPtr>& text_layers, double gamma, double tau) {
    if (time_layers.size() != text_layers.size()) {
        throw std::invalid_argument("feature_loss: layer counts disagree, " +
                                    std::to_string(time_layers.size()) + " vs " +
                                    std::to_string(text_layers.size()));
    }
    if (time_layers.empty()) throw std::invalid_argument("feature_loss: no layers given");
    if (!(gamma > 0.0)) throw ConfigError("feature_loss: decay factor must be positive");

    const std::size_t n = time_layers.size();
    FeatureLossResult result;
    TensorPtr total;
    for (std::size_t m = 0; m < n; ++m) {
        TensorPtr layer = info_nce(g, time_layers[m], text_layers[m], tau);
        result.per_layer.push_back(layer);
        const double weight = std::pow(gamma, static_cast<double>(n - 1 - m));
        TensorPtr term = g.scale(layer, weight);
        total = total ? g.add(total, term) : term;
    }
    result.total = total;
    return result;
}

TransportPlan sinkhorn(const TensorPtr& cost, const std::vector<double>& a,
                       const std::vector<double>& b, double mu, int max_iters, double tol) {
    if (!(mu > 0.0)) throw ConfigError("sinkhorn: mu must be positive");
    if (max_iters < 1) throw ConfigError("sinkhorn: max_iters must be >= 1");
    const std::int64_t n = cost->rows(), m = cost->cols();
    if (static_cast<std::int64_t>(a.size()) != n || static_cast<std::int64_t>(b.size()) != m) {
        throw std::invalid_argument("sinkhorn: marginal lengths do not match cost shape " +
                                    cost->shape_str());
    }
    check_marginal(a, "a");
    check_marginal(b, "b");
    if (!cost->all_finite()) throw NumericError("sinkhorn: cost matrix has non-finite entries");

    // Kernel in log domain: K = -W/mu, plan = exp(K + u 1^T + 1 v^T).
    std::vector<double> klog(cost->data.size());
    for (std::size_t i = 0; i < klog.size(); ++i) klog[i] = -cost->data[i] / mu;
    std::vector<double> loga(a.size()), logb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) loga[i] = std::log(a[i]);
    for (std::size_t j = 0; j < b.size(); ++j) logb[j] = std::log(b[j]);

    std::vector<double> logu(static_cast<std::size_t>(n), 0.0);
    std::vector<double> logv(static_cast<std::size_t>(m), 0.0);
    std::vector<double> row_buf(static_cast<std::size_t>(m));
    std::vector<double> col_buf(static_cast<std::size_t>(n));

    TransportPlan result;
    result.a = a;
    result.b = b;

    std::vector<double> plan(klog.size());
    auto fill_plan = [&]() {
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < m; ++j) {
                const std::size_t k = static_cast<std::size_t>(i * m + j);
                plan[k] = std::exp(klog[k] + logu[static_cast<std::size_t>(i)] +
                                   logv[static_cast<std::size_t>(j)]);
            }
    };
    auto violation = [&]() {
        double worst = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::int64_t j = 0; j < m; ++j) s += plan[static_cast<std::size_t>(i * m + j)];
            worst = std::max(worst, std::fabs(s - a[static_cast<std::size_t>(i)]));
        }
        for (std::int64_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::int64_t i = 0; i < n; ++i) s += plan[static_cast<std::size_t>(i * m + j)];
            worst = std::max(worst, std::fabs(s - b[static_cast<std::size_t>(j)]));
        }
        return worst;
    };

    for (int iter = 1; iter <= max_iters; ++iter) {
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < m; ++j)
                row_buf[static_cast<std::size_t>(j)] =
                    klog[static_cast<std::size_t>(i * m + j)] + logv[static_cast<std::size_t>(j)];
            logu[static_cast<std::size_t>(i)] = loga[static_cast<std::size_t>(i)] - lse(row_buf.data(), m, 1);
        }
        for (std::int64_t j = 0; j < m; ++j) {
            for (std::int64_t i = 0; i < n; ++i)
                col_buf[static_cast<std::size_t>(i)] =
                    klog[static_cast<std::size_t>(i * m + j)] + logu[static_cast<std::size_t>(i)];
            logv[static_cast<std::size_t>(j)] = logb[static_cast<std::size_t>(j)] - lse(col_buf.data(), n, 1);
        }
        result.iterations_run = iter;
        fill_plan();
        if (violation() < tol) {
            result.converged = true;
            break;
        }
    }

    double cost_value = 0.0;
    for (std::size_t k = 0; k < plan.size(); ++k) {
        if (!std::isfinite(plan[k])) throw NumericError("sinkhorn: non-finite transport plan entry");
        cost_value += plan[k] * cost->data[k];
    }
    result.cost = cost_value;
    result.plan = Tensor::from({n, m}, std::move(plan), false);
    return result;
}

TensorPtr ot_loss(Graph& g, const TensorPtr& y_time, const TensorPtr& y_text,
                  const OtOptions& options) {
    if (y_time->shape != y_text->shape) {
        throw std::invalid_argument("ot_loss: output shapes disagree, " + y_time->shape_str() + " vs " +
                                    y_text->shape_str());
    }
    TensorPtr lhs = y_time, rhs = y_text;
    if (options.axis == OtAxis::Horizon) {
        lhs = g.transpose(lhs);
        rhs = g.transpose(rhs);
    }
    TensorPtr w = (options.cost == OtCost::SqEuclidean) ? g.pairwise_sqdist_cols(lhs, rhs)
                                                        : g.pairwise_absdist_cols(lhs, rhs);
    const std::int64_t n = w->rows(), m = w->cols();
    const std::vector<double> marg_a(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    const std::vector<double> marg_b(static_cast<std::size_t>(m), 1.0 / static_cast<double>(m));
    const double log_nm = std::log(static_cast<double>(n) * static_cast<double>(m));

    if (!options.unrolled) {
        // Envelope gradient: the plan is a constant, gradients reach the
        // outputs only through the cost matrix.
        TransportPlan plan = sinkhorn(w, marg_a, marg_b, options.mu, options.iters, options.tol);
        double neg_entropy = 0.0;
        for (double p : plan.plan->data) {
            if (p > 0.0) neg_entropy += p * std::log(p);
        }
        const double constant = options.mu * (neg_entropy + log_nm);
        return g.add(g.sum(g.mul(plan.plan, w)), Tensor::scalar(constant, false));
    }

    // Unrolled mode: the fixed-count Sinkhorn iteration is carried out with
    // tape operations so gradients flow through the plan itself.
    TensorPtr klog = g.scale(w, -1.0 / options.mu);
    TensorPtr loga = Tensor::full({n, 1}, std::log(1.0 / static_cast<double>(n)), false);
    TensorPtr logb = Tensor::full({1, m}, std::log(1.0 / static_cast<double>(m)), false);
    TensorPtr logu = Tensor::zeros({n, 1}, false);
    TensorPtr logv = Tensor::zeros({1, m}, false);
    for (int iter = 0; iter < options.iters; ++iter) {
        logu = g.sub(loga, g.logsumexp_rows(g.add_row(klog, logv)));
        logv = g.sub(logb, g.logsumexp_cols(g.add_col(klog, logu)));
    }
    TensorPtr log_plan = g.add_col(g.add_row(klog, logv), logu);
    TensorPtr plan = g.exp(log_plan);
    TensorPtr transport = g.sum(g.mul(plan, w));
    TensorPtr neg_entropy = g.sum(g.mul(plan, log_plan));
    return g.add(transport,
                 g.add(g.scale(neg_entropy, options.mu), Tensor::scalar(options.mu * log_nm, false)));
}

TensorPtr task_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target, TaskLossKind kind) {
    switch (kind) {
        case TaskLossKind::SmoothL1:
            return g.smooth_l1_loss(pred, target);
        case TaskLossKind::Smape:
            return g.smape_loss(pred, target);
        case TaskLossKind::Mse:
            return g.mse_loss(pred, target);
    }
    throw ConfigError("task_loss: unknown kind");
}

TensorPtr total_loss(Graph& g, const TensorPtr& task, const TensorPtr& feature, const TensorPtr& ot,
                     double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("total_loss: weights must be >= 0");
    if (!std::isfinite(task->item())) throw NumericError("total_loss: task term is not finite");
    if (!std::isfinite(feature->item())) throw NumericError("total_loss: feature term is not finite");
    if (!std::isfinite(ot->item())) throw NumericError("total_loss: ot term is not finite");
    return g.add(g.add(task, g.scale(feature, alpha)), g.scale(ot, beta));
}

}  // namespace tstcd
