// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "errors.hpp"
#include "series.hpp"

using namespace tstcd;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/tstcd_test_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv shapes and row order") {
    const auto path = write_temp("ok.csv", "ts,a,b\n1,1.5,2\n2,3,4\n3,5,-6.25\n");
    SeriesTable t = load_csv(path);
    CHECK(t.length() == 3);
    CHECK(t.variates() == 2);
    CHECK(t.variate_names == std::vector<std::string>{"a", "b"});
    CHECK(t.at(0, 0) == 1.5);
    CHECK(t.at(2, 1) == -6.25);
}

TEST_CASE("load_csv error cases") {
    SUBCASE("header only") {
        const auto path = write_temp("hdr.csv", "ts,a,b\n");
        CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("no data rows"), ParseError);
    }
    SUBCASE("blank cell cites the line") {
        std::string content = "ts,a\n";
        for (int i = 1; i <= 5; ++i) content += std::to_string(i) + ",1\n";
        content += "6,\n";  // line 7 of the file
        const auto path = write_temp("blank.csv", content);
        CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 7"), ParseError);
    }
    SUBCASE("ragged row") {
        const auto path = write_temp("ragged.csv", "ts,a,b\n1,2,3\n2,4\n");
        CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 3"), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_csv("/tmp/does_not_exist_tstcd.csv"), IoError);
    }
}

TEST_CASE("csv round trip is bitwise") {
    SeriesTable t = synth_generate(99, 40, 3, SynthSpec{{12.0}, {1.0}, 0.01, 0.2});
    const auto path = write_temp("roundtrip.csv", "");
    save_csv(t, path);
    SeriesTable back = load_csv(path);
    CHECK(back.values == t.values);
    CHECK(back.variate_names == t.variate_names);
}

TEST_CASE("synth_generate determinism and spread") {
    const SynthSpec spec{{24.0}, {1.0}, 0.0, 0.1};
    SeriesTable a = synth_generate(5, 50, 2, spec);
    SeriesTable b = synth_generate(5, 50, 2, spec);
    CHECK(a.values == b.values);

    SeriesTable c = synth_generate(6, 50, 2, spec);
    CHECK(a.values != c.values);
}

TEST_CASE("synth_generate noiseless single sinusoid closed form") {
    // With zero noise the generator is sum_k amp*sin(2*pi*t/period + phase);
    // recover the phase from t=0 and check t=6 against the closed form.
    const SynthSpec spec{{24.0}, {1.0}, 0.0, 0.0};
    SeriesTable t = synth_generate(3, 10, 1, spec);
    const double phase = std::asin(t.at(0, 0));
    const double expect = std::sin(2.0 * 3.14159265358979323846 * 6.0 / 24.0 + phase);
    const double expect_alt = std::sin(2.0 * 3.14159265358979323846 * 6.0 / 24.0 + (3.14159265358979323846 - phase));
    const bool matches = std::fabs(t.at(6, 0) - expect) < 1e-9 || std::fabs(t.at(6, 0) - expect_alt) < 1e-9;
    CHECK(matches);
}

TEST_CASE("synth_generate rejects non-positive periods") {
    CHECK_THROWS_AS(synth_generate(1, 10, 1, SynthSpec{{0.0}, {1.0}, 0.0, 0.0}), ConfigError);
}

TEST_CASE("normalize closed form and inverse") {
    SeriesTable t;
    t.variate_names = {"a"};
    t.timestamps = {"1", "2", "3"};
    t.values = {1, 2, 3};
    NormStats stats = compute_stats(t);
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.std[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));

    SeriesTable n = normalize(t, stats);
    CHECK(n.at(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(n.at(1, 0) == doctest::Approx(0.0));
    CHECK(n.at(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));

    SeriesTable back = denormalize(n, stats);
    for (std::size_t i = 0; i < t.values.size(); ++i)
        CHECK(back.values[i] == doctest::Approx(t.values[i]).epsilon(1e-12));
}

TEST_CASE("constant variate is rejected by name") {
    SeriesTable t;
    t.variate_names = {"flatline"};
    t.timestamps = {"1", "2"};
    t.values = {5, 5};
    CHECK_THROWS_WITH_AS(compute_stats(t), doctest::Contains("flatline"), ConfigError);
}

TEST_CASE("window_split counts and contents") {
    SeriesTable t = synth_generate(1, 10, 2, SynthSpec{{5.0}, {1.0}, 0.0, 0.3});

    SUBCASE("N = floor((T-L-H)/stride) + 1") {
        WindowSet ws = window_split(t, 4, 2, 1);
        CHECK(ws.count() == 5);
    }
    SUBCASE("boundary: exactly one window") {
        SeriesTable t6 = t.slice_rows(0, 6);
        WindowSet ws = window_split(t6, 4, 2, 1);
        CHECK(ws.count() == 1);
    }
    SUBCASE("too short errors") {
        SeriesTable t5 = t.slice_rows(0, 5);
        CHECK_THROWS_WITH_AS(window_split(t5, 4, 2, 1), doctest::Contains("too short"), ConfigError);
    }
    SUBCASE("targets equal source rows at the stated offsets") {
        WindowSet ws = window_split(t, 4, 2, 2);
        for (std::int64_t i = 0; i < ws.count(); ++i) {
            const std::int64_t origin = ws.origins[static_cast<std::size_t>(i)];
            for (std::int64_t h = 0; h < 2; ++h)
                for (std::int64_t p = 0; p < 2; ++p)
                    CHECK(ws.target(i)[h * 2 + p] == t.at(origin + 4 + h, p));
            for (std::int64_t l = 0; l < 4; ++l)
                for (std::int64_t p = 0; p < 2; ++p)
                    CHECK(ws.input(i)[l * 2 + p] == t.at(origin + l, p));
        }
    }
}

TEST_CASE("train stats are unaffected by val/test resizing") {
    SeriesTable t = synth_generate(17, 100, 2, SynthSpec{{11.0}, {1.0}, 0.01, 0.2});
    SeriesSplits s1 = chrono_split(t, SplitRatios{0.5, 0.2, 0.3});
    SeriesSplits s2 = chrono_split(t, SplitRatios{0.5, 0.1, 0.4});
    NormStats a = compute_stats(s1.train);
    NormStats b = compute_stats(s2.train);
    CHECK(a.mean == b.mean);
    CHECK(a.std == b.std);
}
