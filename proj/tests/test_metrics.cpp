// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "metrics.hpp"
#include "run_config.hpp"
#include "series.hpp"
#include "trainer.hpp"

using namespace tstcd;

TEST_CASE("metric hand oracles on 3-point toy series") {
    const std::vector<double> pred = {1.0, 2.0, 4.0};
    const std::vector<double> target = {1.0, 3.0, 2.0};
    // errors: 0, -1, 2
    CHECK(metric_mse(pred, target) == doctest::Approx((0.0 + 1.0 + 4.0) / 3.0));
    CHECK(metric_mae(pred, target) == doctest::Approx((0.0 + 1.0 + 2.0) / 3.0));
    const double smape_expect = 200.0 / 3.0 * (0.0 + 1.0 / 5.0 + 2.0 / 6.0);
    CHECK(metric_smape(pred, target) == doctest::Approx(smape_expect).epsilon(1e-12));
}

TEST_CASE("perfect forecast zeroes every metric") {
    const std::vector<double> y = {3.0, 4.0, 5.0};
    CHECK(metric_mse(y, y) == 0.0);
    CHECK(metric_mae(y, y) == 0.0);
    CHECK(metric_smape(y, y) == 0.0);
    const std::vector<double> in_sample = {1.0, 2.0, 3.0, 4.0};
    CHECK(metric_mase(y, y, in_sample, 1) == 0.0);
}

TEST_CASE("mase closed form") {
    // pred [4,5] vs target [3,4]: MAE 1; in-sample [1,2,3], m=1: scale 1.
    const std::vector<double> pred = {4.0, 5.0};
    const std::vector<double> target = {3.0, 4.0};
    const std::vector<double> in_sample = {1.0, 2.0, 3.0};
    CHECK(seasonal_naive_scale(in_sample, 1) == doctest::Approx(1.0));
    CHECK(metric_mase(pred, target, in_sample, 1) == doctest::Approx(1.0));
}

TEST_CASE("mase needs enough in-sample history") {
    CHECK_THROWS_AS(metric_mase({1.0}, {1.0}, {1.0, 2.0}, 2), std::invalid_argument);
}

TEST_CASE("smape epsilon floor survives zero targets") {
    CHECK(std::isfinite(metric_smape({0.0}, {0.0})));
    CHECK(metric_smape({0.0}, {0.0}) == 0.0);
    CHECK(metric_smape({1e-12}, {0.0}) > 0.0);
}

TEST_CASE("naive2: plain naive fallback when non-seasonal") {
    const std::vector<double> history = {1.0, 2.0, 3.0};
    const auto f = naive2_forecast(history, 1, 4);
    CHECK(f == std::vector<double>{3.0, 3.0, 3.0, 3.0});
}

TEST_CASE("naive2: multiplicative seasonal adjustment on a clean pattern") {
    // Period-2 pattern 2,4,2,4,...: indices 2/3 and 4/3; deseasonalized last
    // value is 3, so the forecast re-seasonalizes to 2,4,2,...
    std::vector<double> history;
    for (int i = 0; i < 4; ++i) {
        history.push_back(2.0);
        history.push_back(4.0);
    }
    const auto f = naive2_forecast(history, 2, 4);
    CHECK(f[0] == doctest::Approx(2.0));
    CHECK(f[1] == doctest::Approx(4.0));
    CHECK(f[2] == doctest::Approx(2.0));
    CHECK(f[3] == doctest::Approx(4.0));
}

TEST_CASE("naive2 falls back to naive when values are nonpositive") {
    const std::vector<double> history = {2.0, -4.0, 2.0, -4.0};
    const auto f = naive2_forecast(history, 2, 2);
    CHECK(f == std::vector<double>{-4.0, -4.0});
}

TEST_CASE("metrics report json contains owa only when set") {
    MetricsReport r;
    r.mse = 1.0;
    CHECK(r.to_json().find("owa") == std::string::npos);
    r.owa = 0.9;
    CHECK(r.to_json().find("\"owa\":") != std::string::npos);
}

TEST_CASE("eval owa agrees with a direct naive2 computation on the same split") {
    RunConfig cfg;
    cfg.synth_seed = 41;
    cfg.synth_t = 160;
    cfg.synth_p = 2;
    cfg.synth_periods = {12.0, 1000000.0};
    cfg.synth_amplitudes = {1.0, 6.0};
    cfg.synth_noise_std = 0.3;
    cfg.lookback = 24;
    cfg.horizon = 4;
    cfg.width = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.ffn_mult = 2;
    cfg.prompt_len = 2;
    cfg.lora_rank = 2;
    cfg.vocab_size = 32;
    cfg.max_anchor_tokens = 4;
    cfg.sinkhorn_iters = 20;
    cfg.epochs = 2;
    cfg.batch = 8;
    cfg.seasonality = 12;

    TrainResult tr = run_train(cfg, "/tmp/tstcd_owa_run");
    const MetricsReport report = run_eval(tr.checkpoint_path, cfg);
    REQUIRE(report.owa.has_value());

    // Recompute both baseline metrics from scratch: naive2 predictions per
    // test window and variate, same raw split.
    SeriesTable raw = synth_generate(cfg.synth_seed, cfg.synth_t, cfg.synth_p, cfg.synth_spec());
    SeriesSplits splits =
        chrono_split(raw, SplitRatios{cfg.split_train, cfg.split_val, cfg.split_test});
    WindowSet test_raw = window_split(splits.test, cfg.lookback, cfg.horizon, cfg.stride);

    std::vector<double> n2_all, target_all;
    std::vector<std::vector<double>> n2_by_var(2), target_by_var(2);
    for (std::int64_t i = 0; i < test_raw.count(); ++i) {
        std::vector<std::vector<double>> nf(2);
        for (std::int64_t p = 0; p < 2; ++p) {
            std::vector<double> history(static_cast<std::size_t>(cfg.lookback));
            for (std::int64_t t = 0; t < cfg.lookback; ++t)
                history[static_cast<std::size_t>(t)] = test_raw.input(i)[t * 2 + p];
            nf[static_cast<std::size_t>(p)] = naive2_forecast(history, cfg.seasonality, cfg.horizon);
            for (std::int64_t h = 0; h < cfg.horizon; ++h) {
                n2_by_var[static_cast<std::size_t>(p)].push_back(
                    nf[static_cast<std::size_t>(p)][static_cast<std::size_t>(h)]);
                target_by_var[static_cast<std::size_t>(p)].push_back(test_raw.target(i)[h * 2 + p]);
            }
        }
        for (std::int64_t h = 0; h < cfg.horizon; ++h) {
            for (std::int64_t p = 0; p < 2; ++p) {
                n2_all.push_back(nf[static_cast<std::size_t>(p)][static_cast<std::size_t>(h)]);
                target_all.push_back(test_raw.target(i)[h * 2 + p]);
            }
        }
    }
    const double smape_n2 = metric_smape(n2_all, target_all);
    double mase_n2 = 0.0;
    for (std::int64_t p = 0; p < 2; ++p) {
        std::vector<double> in_sample(static_cast<std::size_t>(splits.train.length()));
        for (std::int64_t t = 0; t < splits.train.length(); ++t)
            in_sample[static_cast<std::size_t>(t)] = splits.train.at(t, p);
        mase_n2 += metric_mase(n2_by_var[static_cast<std::size_t>(p)],
                               target_by_var[static_cast<std::size_t>(p)], in_sample,
                               cfg.seasonality);
    }
    mase_n2 /= 2.0;

    const double expect = 0.5 * (report.smape / smape_n2 + report.mase / mase_n2);
    CHECK(*report.owa == doctest::Approx(expect).epsilon(1e-12));

    // A forecast equal to naive2 makes both ratios one.
    CHECK(0.5 * (smape_n2 / smape_n2 + mase_n2 / mase_n2) == doctest::Approx(1.0));
}
