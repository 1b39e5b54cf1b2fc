// SPDX-License-Identifier: Apache-2.0

#include "metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "errors.hpp"

namespace tstcd {

namespace {

void check_lengths(const std::vector<double>& pred, const std::vector<double>& target,
                   const char* name) {
    if (pred.size() != target.size() || pred.empty()) {
        throw std::invalid_argument(std::string(name) + ": prediction and target lengths disagree (" +
                                    std::to_string(pred.size()) + " vs " + std::to_string(target.size()) +
                                    ")");
    }
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double metric_mse(const std::vector<double>& pred, const std::vector<double>& target) {
    check_lengths(pred, target, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        acc += e * e;
    }
    return acc / static_cast<double>(pred.size());
}

double metric_mae(const std::vector<double>& pred, const std::vector<double>& target) {
    check_lengths(pred, target, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

double metric_smape(const std::vector<double>& pred, const std::vector<double>& target) {
    check_lengths(pred, target, "smape");
    constexpr double kEps = 1e-8;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double num = std::fabs(pred[i] - target[i]);
        const double den = std::max(std::fabs(target[i]) + std::fabs(pred[i]), kEps);
        acc += num / den;
    }
    return 200.0 * acc / static_cast<double>(pred.size());
}

double seasonal_naive_scale(const std::vector<double>& in_sample, std::int64_t m) {
    if (m < 1) throw std::invalid_argument("mase: seasonality must be >= 1");
    const std::int64_t n = static_cast<std::int64_t>(in_sample.size());
    if (n <= m) {
        throw std::invalid_argument("mase: in-sample history of " + std::to_string(n) +
                                    " values is too short for seasonality " + std::to_string(m));
    }
    double acc = 0.0;
    for (std::int64_t t = m; t < n; ++t) {
        acc += std::fabs(in_sample[static_cast<std::size_t>(t)] -
                         in_sample[static_cast<std::size_t>(t - m)]);
    }
    return acc / static_cast<double>(n - m);
}

double metric_mase(const std::vector<double>& pred, const std::vector<double>& target,
                   const std::vector<double>& in_sample, std::int64_t m) {
    check_lengths(pred, target, "mase");
    const double scale = seasonal_naive_scale(in_sample, m);
    if (!(scale > 0.0)) throw NumericError("mase: zero naive scale on the in-sample history");
    return metric_mae(pred, target) / scale;
}

std::vector<double> naive2_forecast(const std::vector<double>& history, std::int64_t m,
                                    std::int64_t horizon) {
    if (history.empty()) throw std::invalid_argument("naive2: empty history");
    if (horizon < 1) throw std::invalid_argument("naive2: horizon must be >= 1");
    const std::int64_t n = static_cast<std::int64_t>(history.size());
    const double last = history.back();

    bool seasonal = m > 1 && n >= 2 * m;
    if (seasonal) {
        for (double v : history) {
            if (!(v > 0.0)) {
                seasonal = false;
                break;
            }
        }
    }
    if (!seasonal) return std::vector<double>(static_cast<std::size_t>(horizon), last);

    double overall = 0.0;
    for (double v : history) overall += v;
    overall /= static_cast<double>(n);

    std::vector<double> phase_mean(static_cast<std::size_t>(m), 0.0);
    std::vector<std::int64_t> phase_count(static_cast<std::size_t>(m), 0);
    for (std::int64_t t = 0; t < n; ++t) {
        phase_mean[static_cast<std::size_t>(t % m)] += history[static_cast<std::size_t>(t)];
        ++phase_count[static_cast<std::size_t>(t % m)];
    }
    std::vector<double> index(static_cast<std::size_t>(m));
    for (std::int64_t k = 0; k < m; ++k) {
        index[static_cast<std::size_t>(k)] =
            (phase_mean[static_cast<std::size_t>(k)] / static_cast<double>(phase_count[static_cast<std::size_t>(k)])) /
            overall;
    }

    const double deseason_last = last / index[static_cast<std::size_t>((n - 1) % m)];
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (std::int64_t h = 0; h < horizon; ++h) {
        out[static_cast<std::size_t>(h)] = deseason_last * index[static_cast<std::size_t>((n + h) % m)];
    }
    return out;
}

std::string MetricsReport::to_json() const {
    std::ostringstream os;
    os << "{\"mse\":" << fmt(mse) << ",\"mae\":" << fmt(mae) << ",\"smape\":" << fmt(smape)
       << ",\"mase\":" << fmt(mase);
    if (owa) os << ",\"owa\":" << fmt(*owa);
    os << ",\"per_horizon_mse\":[";
    for (std::size_t i = 0; i < per_horizon_mse.size(); ++i) {
        if (i) os << ',';
        os << fmt(per_horizon_mse[i]);
    }
    os << "],\"per_horizon_mae\":[";
    for (std::size_t i = 0; i < per_horizon_mae.size(); ++i) {
        if (i) os << ',';
        os << fmt(per_horizon_mae[i]);
    }
    os << "],\"n_windows\":" << n_windows << ",\"wall_seconds\":" << fmt(wall_seconds) << "}";
    return os.str();
}

}  // namespace tstcd
