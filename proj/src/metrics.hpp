// SPDX-License-Identifier: Apache-2.0
//
// Forecast accuracy metrics. MASE scales against the seasonal-naive error on
// in-sample history; OWA averages the SMAPE and MASE ratios against the
// naive2 baseline (seasonally adjusted naive) and is reported only when a
// seasonality is configured.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tstcd {

struct MetricsReport {
    double mse = 0.0;
    double mae = 0.0;
    double smape = 0.0;
    double mase = 0.0;
    std::optional<double> owa;
    std::vector<double> per_horizon_mse;
    std::vector<double> per_horizon_mae;
    double wall_seconds = 0.0;
    std::int64_t n_windows = 0;

    std::string to_json() const;
};

double metric_mse(const std::vector<double>& pred, const std::vector<double>& target);
double metric_mae(const std::vector<double>& pred, const std::vector<double>& target);
// 200/n * sum |e| / max(|y| + |yhat|, 1e-8)
double metric_smape(const std::vector<double>& pred, const std::vector<double>& target);

// mean |y_t - y_{t-m}| over the in-sample history.
double seasonal_naive_scale(const std::vector<double>& in_sample, std::int64_t m);

// MAE(pred)/scale with the scale above; errors when the history is shorter
// than m + 1.
double metric_mase(const std::vector<double>& pred, const std::vector<double>& target,
                   const std::vector<double>& in_sample, std::int64_t m);

// Seasonally adjusted naive forecast: multiplicative seasonal indices are
// estimated from phase means over the history, the deseasonalized last value
// is carried forward and re-seasonalized. Falls back to the plain naive when
// m <= 1, the history is shorter than 2*m, or nonpositive values make the
// multiplicative indices undefined.
std::vector<double> naive2_forecast(const std::vector<double>& history, std::int64_t m,
                                    std::int64_t horizon);

}  // namespace tstcd
