// SPDX-License-Identifier: Apache-2.0

#include "series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace tstcd {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_cell(const std::string& cell, std::int64_t line_no, std::int64_t col) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last) {
        throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                         ": cannot parse \"" + cell + "\" as a number");
    }
    return value;
}

}  // namespace

SeriesTable SeriesTable::slice_rows(std::int64_t begin, std::int64_t end) const {
    SeriesTable out;
    out.variate_names = variate_names;
    const std::int64_t P = variates();
    for (std::int64_t t = begin; t < end; ++t) {
        out.timestamps.push_back(timestamps[static_cast<std::size_t>(t)]);
        for (std::int64_t p = 0; p < P; ++p) out.values.push_back(at(t, p));
    }
    return out;
}

SeriesTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    const std::vector<std::string> header = split_line(line);
    if (header.size() < 2) throw ParseError(path + ": header needs a timestamp column and at least one variate");

    SeriesTable table;
    table.variate_names.assign(header.begin() + 1, header.end());
    const std::size_t P = table.variate_names.size();

    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != P + 1) {
            throw ParseError(path + ": line " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected " + std::to_string(P + 1));
        }
        table.timestamps.push_back(cells[0]);
        for (std::size_t p = 0; p < P; ++p) {
            table.values.push_back(parse_cell(cells[p + 1], line_no, static_cast<std::int64_t>(p)));
        }
    }
    if (table.timestamps.empty()) throw ParseError(path + ": no data rows");
    return table;
}

void save_csv(const SeriesTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "timestamp";
    for (const auto& name : table.variate_names) out << ',' << name;
    out << '\n';
    char buf[48];
    const std::int64_t P = table.variates();
    for (std::int64_t t = 0; t < table.length(); ++t) {
        out << table.timestamps[static_cast<std::size_t>(t)];
        for (std::int64_t p = 0; p < P; ++p) {
            std::snprintf(buf, sizeof(buf), "%.17g", table.at(t, p));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

SeriesTable synth_generate(std::uint64_t seed, std::int64_t T, std::int64_t P, const SynthSpec& spec) {
    if (T < 1 || P < 1) throw ConfigError("synth_generate: T and P must be >= 1");
    if (spec.periods.size() != spec.amplitudes.size()) {
        throw ConfigError("synth_generate: periods and amplitudes must have the same length");
    }
    for (double period : spec.periods) {
        if (!(period > 0.0)) throw ConfigError("synth_generate: periods must be positive");
    }

    Rng rng(seed);
    const std::size_t K = spec.periods.size();
    std::vector<double> phases(K * static_cast<std::size_t>(P));
    for (auto& ph : phases) ph = rng.uniform(0.0, 2.0 * 3.14159265358979323846);

    SeriesTable table;
    for (std::int64_t p = 0; p < P; ++p) table.variate_names.push_back("v" + std::to_string(p));
    table.values.resize(static_cast<std::size_t>(T * P));
    for (std::int64_t t = 0; t < T; ++t) {
        table.timestamps.push_back(std::to_string(t));
        for (std::int64_t p = 0; p < P; ++p) {
            double v = spec.trend * static_cast<double>(t);
            for (std::size_t k = 0; k < K; ++k) {
                v += spec.amplitudes[k] *
                     std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(t) / spec.periods[k] +
                              phases[k * static_cast<std::size_t>(P) + static_cast<std::size_t>(p)]);
            }
            if (spec.noise_std > 0.0) v += rng.gaussian(0.0, spec.noise_std);
            table.at(t, p) = v;
        }
    }
    return table;
}

NormStats compute_stats(const SeriesTable& table) {
    const std::int64_t T = table.length(), P = table.variates();
    if (T == 0) throw ConfigError("compute_stats: empty table");
    NormStats stats;
    stats.mean.assign(static_cast<std::size_t>(P), 0.0);
    stats.std.assign(static_cast<std::size_t>(P), 0.0);
    for (std::int64_t p = 0; p < P; ++p) {
        double mu = 0.0;
        for (std::int64_t t = 0; t < T; ++t) mu += table.at(t, p);
        mu /= static_cast<double>(T);
        double var = 0.0;
        for (std::int64_t t = 0; t < T; ++t) {
            const double d = table.at(t, p) - mu;
            var += d * d;
        }
        var /= static_cast<double>(T);  // population convention
        if (!(var > 0.0)) {
            throw ConfigError("variate \"" + table.variate_names[static_cast<std::size_t>(p)] +
                              "\" is constant, cannot normalize");
        }
        stats.mean[static_cast<std::size_t>(p)] = mu;
        stats.std[static_cast<std::size_t>(p)] = std::sqrt(var);
    }
    return stats;
}

SeriesTable normalize(const SeriesTable& table, const NormStats& stats) {
    const std::int64_t P = table.variates();
    if (static_cast<std::int64_t>(stats.mean.size()) != P) {
        throw ConfigError("normalize: stats cover " + std::to_string(stats.mean.size()) +
                          " variates, table has " + std::to_string(P));
    }
    SeriesTable out = table;
    for (std::int64_t t = 0; t < table.length(); ++t)
        for (std::int64_t p = 0; p < P; ++p)
            out.at(t, p) = (table.at(t, p) - stats.mean[static_cast<std::size_t>(p)]) /
                           stats.std[static_cast<std::size_t>(p)];
    return out;
}

SeriesTable denormalize(const SeriesTable& table, const NormStats& stats) {
    const std::int64_t P = table.variates();
    SeriesTable out = table;
    for (std::int64_t t = 0; t < table.length(); ++t)
        for (std::int64_t p = 0; p < P; ++p)
            out.at(t, p) = table.at(t, p) * stats.std[static_cast<std::size_t>(p)] +
                           stats.mean[static_cast<std::size_t>(p)];
    return out;
}

void denormalize_rows(double* rows, std::int64_t n_rows, const NormStats& stats) {
    const std::int64_t P = static_cast<std::int64_t>(stats.mean.size());
    for (std::int64_t t = 0; t < n_rows; ++t)
        for (std::int64_t p = 0; p < P; ++p)
            rows[t * P + p] = rows[t * P + p] * stats.std[static_cast<std::size_t>(p)] +
                              stats.mean[static_cast<std::size_t>(p)];
}

WindowSet window_split(const SeriesTable& table, std::int64_t L, std::int64_t H, std::int64_t stride) {
    if (L < 1 || H < 1 || stride < 1) throw ConfigError("window_split: L, H and stride must be >= 1");
    const std::int64_t T = table.length(), P = table.variates();
    if (T < L + H) {
        throw ConfigError("series too short: " + std::to_string(T) + " rows, need at least " +
                          std::to_string(L + H));
    }
    WindowSet ws;
    ws.L = L;
    ws.H = H;
    ws.P = P;
    const std::int64_t N = (T - L - H) / stride + 1;
    ws.inputs.reserve(static_cast<std::size_t>(N * L * P));
    ws.targets.reserve(static_cast<std::size_t>(N * H * P));
    for (std::int64_t i = 0; i < N; ++i) {
        const std::int64_t start = i * stride;
        ws.origins.push_back(start);
        for (std::int64_t t = 0; t < L; ++t)
            for (std::int64_t p = 0; p < P; ++p) ws.inputs.push_back(table.at(start + t, p));
        for (std::int64_t t = 0; t < H; ++t)
            for (std::int64_t p = 0; p < P; ++p) ws.targets.push_back(table.at(start + L + t, p));
    }
    return ws;
}

SeriesSplits chrono_split(const SeriesTable& table, const SplitRatios& ratios) {
    if (ratios.train <= 0.0 || ratios.val < 0.0 || ratios.test <= 0.0 ||
        ratios.train + ratios.val + ratios.test > 1.0 + 1e-9) {
        throw ConfigError("chrono_split: invalid split ratios");
    }
    const std::int64_t T = table.length();
    const std::int64_t n_train = static_cast<std::int64_t>(ratios.train * static_cast<double>(T));
    const std::int64_t n_val = static_cast<std::int64_t>(ratios.val * static_cast<double>(T));
    if (n_train < 1 || T - n_train - n_val < 1) throw ConfigError("chrono_split: series too short for splits");
    SeriesSplits splits;
    splits.train = table.slice_rows(0, n_train);
    splits.val = table.slice_rows(n_train, n_train + n_val);
    splits.test = table.slice_rows(n_train + n_val, T);
    return splits;
}

}  // namespace tstcd
