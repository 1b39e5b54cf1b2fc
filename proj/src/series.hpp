// SPDX-License-Identifier: Apache-2.0
//
// Series ingestion: CSV loading, seeded synthetic generation, per-variate
// z-score normalization and supervised (lookback, horizon) windowing.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tstcd {

// T x P table of values with opaque timestamp labels.
struct SeriesTable {
    std::vector<std::string> timestamps;    // length T
    std::vector<double> values;             // row-major T x P
    std::vector<std::string> variate_names; // length P

    std::int64_t length() const { return static_cast<std::int64_t>(timestamps.size()); }
    std::int64_t variates() const { return static_cast<std::int64_t>(variate_names.size()); }
    double at(std::int64_t t, std::int64_t p) const {
        return values[static_cast<std::size_t>(t * variates() + p)];
    }
    double& at(std::int64_t t, std::int64_t p) {
        return values[static_cast<std::size_t>(t * variates() + p)];
    }

    // Contiguous row range [begin, end).
    SeriesTable slice_rows(std::int64_t begin, std::int64_t end) const;
};

// Per-variate mean and population standard deviation.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;
};

// Supervised windows: inputs N x L x P, targets N x H x P.
struct WindowSet {
    std::int64_t L = 0, H = 0, P = 0;
    std::vector<double> inputs;
    std::vector<double> targets;
    std::vector<std::int64_t> origins;  // source row of each window's first input

    std::int64_t count() const { return static_cast<std::int64_t>(origins.size()); }
    const double* input(std::int64_t i) const {
        return inputs.data() + static_cast<std::size_t>(i * L * P);
    }
    const double* target(std::int64_t i) const {
        return targets.data() + static_cast<std::size_t>(i * H * P);
    }
};

struct SynthSpec {
    std::vector<double> periods;
    std::vector<double> amplitudes;  // same length as periods
    double trend = 0.0;
    double noise_std = 0.0;
};

SeriesTable load_csv(const std::string& path);
void save_csv(const SeriesTable& table, const std::string& path);

// Deterministic for a fixed seed:
//   value(t, p) = sum_k amp_k * sin(2*pi*t / period_k + phase_{k,p}) + trend*t + noise
// with phases uniform in [0, 2*pi) and noise ~ N(0, noise_std^2).
SeriesTable synth_generate(std::uint64_t seed, std::int64_t T, std::int64_t P, const SynthSpec& spec);

NormStats compute_stats(const SeriesTable& table);
SeriesTable normalize(const SeriesTable& table, const NormStats& stats);
SeriesTable denormalize(const SeriesTable& table, const NormStats& stats);
void denormalize_rows(double* rows, std::int64_t n_rows, const NormStats& stats);

WindowSet window_split(const SeriesTable& table, std::int64_t L, std::int64_t H, std::int64_t stride);

struct SplitRatios {
    double train = 0.7, val = 0.1, test = 0.2;
};

struct SeriesSplits {
    SeriesTable train, val, test;
};

// Chronological split into contiguous segments.
SeriesSplits chrono_split(const SeriesTable& table, const SplitRatios& ratios);

}  // namespace tstcd
