// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "run_config.hpp"
#include "series.hpp"
#include "trainer.hpp"

using namespace tstcd;

namespace {

RunConfig smoke_config() {
    RunConfig cfg;
    cfg.synth_t = 80;
    cfg.synth_p = 2;
    cfg.synth_noise_std = 0.1;
    cfg.synth_trend = 0.0;
    cfg.lookback = 8;
    cfg.horizon = 4;
    cfg.width = 8;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ffn_mult = 2;
    cfg.prompt_len = 2;
    cfg.lora_rank = 2;
    cfg.vocab_size = 32;
    cfg.max_anchor_tokens = 6;
    cfg.epochs = 2;
    cfg.batch = 8;
    cfg.sinkhorn_iters = 30;
    return cfg;
}

}  // namespace

TEST_CASE("config parse -> serialize -> parse is the identity") {
    RunConfig cfg;
    cfg.set("loss.alpha", "0.25");
    cfg.set("synth.periods", "12,48");
    cfg.set("loss.task", "smape");
    const std::string text = cfg.serialize();
    RunConfig back = RunConfig::parse_text(text);
    CHECK(back.serialize() == text);
}

TEST_CASE("config defaults carry the documented training values") {
    const RunConfig cfg;
    CHECK(cfg.lr == 5e-4);
    CHECK(cfg.alpha == 0.1);
    CHECK(cfg.beta == 0.01);
    CHECK(cfg.mu == 0.1);
    CHECK(cfg.gamma == 0.8);
    CHECK(cfg.sinkhorn_iters == 100);
}

TEST_CASE("unknown and malformed keys are rejected by name") {
    RunConfig cfg;
    CHECK_THROWS_WITH_AS(cfg.set("loss.delta", "1"), doctest::Contains("loss.delta"), ConfigError);
    CHECK_THROWS_WITH_AS(cfg.set("train.lr", "fast"), doctest::Contains("train.lr"), ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::parse_text("no equals sign here\n"), doctest::Contains("line 1"),
                         ConfigError);
    CHECK_THROWS_AS(cfg.set("loss.task", "huber"), ConfigError);
}

TEST_CASE("comments and blank lines are ignored") {
    const RunConfig cfg = RunConfig::parse_text("# comment\n\ntrain.epochs = 7\n");
    CHECK(cfg.epochs == 7);
}

TEST_CASE("checkpoint round trip is bytewise stable") {
    Checkpoint ck;
    ck.add_scalar("meta.x", 1.5);
    ck.add_vector("vec", {1.0, 2.0, 3.0});
    ck.entries.push_back(CheckpointEntry{"mat", {2, 2}, {1, 2, 3, 4}});

    const std::string p1 = "/tmp/tstcd_ck1.bin", p2 = "/tmp/tstcd_ck2.bin";
    ck.save(p1);
    Checkpoint loaded = Checkpoint::load(p1);
    loaded.save(p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(loaded.scalar("meta.x") == 1.5);
    CHECK(loaded.require("vec").data == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("checkpoint corruption fails loudly with offsets") {
    Checkpoint ck;
    ck.add_vector("vec", {1.0, 2.0, 3.0});
    const std::string path = "/tmp/tstcd_ck3.bin";
    ck.save(path);

    SUBCASE("truncation") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
        out.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(path), doctest::Contains("offset"), ParseError);
    }
    SUBCASE("bad magic") {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE!junkjunkjunk";
        out.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(path), doctest::Contains("magic"), ParseError);
    }
    SUBCASE("trailing bytes") {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out << "x";
        out.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(path), doctest::Contains("trailing"), ParseError);
    }
}

TEST_CASE("model checkpoint restores inference bitwise") {
    const RunConfig cfg = smoke_config();
    TrainResult tr = run_train(cfg, "/tmp/tstcd_smoke_run");
    CHECK(tr.trace.size() == 2);

    LoadedModel lm = load_model_checkpoint(tr.checkpoint_path);
    PreparedData data = prepare_data(cfg);
    Graph g;
    auto window = Tensor::from({cfg.lookback, data.test_windows.P},
                               std::vector<double>(data.test_windows.input(0),
                                                   data.test_windows.input(0) +
                                                       cfg.lookback * data.test_windows.P),
                               false);
    auto before = lm.model->forward_infer(g, window)->data;

    // Save again from the loaded model and compare bytes.
    const std::string second = "/tmp/tstcd_smoke_run/checkpoint2.tstcd";
    save_model_checkpoint(*lm.model, lm.stats, lm.normalized, second);
    std::ifstream f1(tr.checkpoint_path, std::ios::binary), f2(second, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    LoadedModel lm2 = load_model_checkpoint(second);
    Graph g2;
    CHECK(lm2.model->forward_infer(g2, window)->data == before);
}

TEST_CASE("trace files are byte-identical across same-seed runs") {
    const RunConfig cfg = smoke_config();
    run_train(cfg, "/tmp/tstcd_det_a");
    run_train(cfg, "/tmp/tstcd_det_b");
    std::ifstream f1("/tmp/tstcd_det_a/trace.jsonl"), f2("/tmp/tstcd_det_b/trace.jsonl");
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(!b1.empty());
    CHECK(b1 == b2);

    RunConfig other = cfg;
    other.seed = cfg.seed + 1;
    run_train(other, "/tmp/tstcd_det_c");
    std::ifstream f3("/tmp/tstcd_det_c/trace.jsonl");
    const std::string b3((std::istreambuf_iterator<char>(f3)), std::istreambuf_iterator<char>());
    CHECK(b1 != b3);
}

TEST_CASE("eval and forecast agree on the same windows") {
    RunConfig cfg = smoke_config();
    cfg.epochs = 3;
    TrainResult tr = run_train(cfg, "/tmp/tstcd_fc_run");

    // Forecast from a CSV holding exactly the first test window's input.
    PreparedData data = prepare_data(cfg);
    SeriesSplits splits = chrono_split(synth_generate(cfg.synth_seed, cfg.synth_t, cfg.synth_p,
                                                      cfg.synth_spec()),
                                       SplitRatios{cfg.split_train, cfg.split_val, cfg.split_test});
    SeriesTable head = splits.test.slice_rows(0, cfg.lookback);
    save_csv(head, "/tmp/tstcd_fc_input.csv");
    run_forecast(tr.checkpoint_path, "/tmp/tstcd_fc_input.csv", 0, "/tmp/tstcd_fc_out.csv");

    SeriesTable fc = load_csv("/tmp/tstcd_fc_out.csv");
    CHECK(fc.length() == cfg.horizon);
    CHECK(fc.variates() == cfg.synth_p);

    // The same window pushed through the in-memory path gives the same values.
    LoadedModel lm = load_model_checkpoint(tr.checkpoint_path);
    std::vector<double> win(head.values);
    for (std::int64_t t = 0; t < cfg.lookback; ++t)
        for (std::int64_t p = 0; p < cfg.synth_p; ++p)
            win[static_cast<std::size_t>(t * cfg.synth_p + p)] =
                (win[static_cast<std::size_t>(t * cfg.synth_p + p)] -
                 lm.stats.mean[static_cast<std::size_t>(p)]) /
                lm.stats.std[static_cast<std::size_t>(p)];
    Graph g;
    auto pred = lm.model->forward_infer(
        g, Tensor::from({cfg.lookback, cfg.synth_p}, std::move(win), false));
    std::vector<double> yhat = pred->data;
    denormalize_rows(yhat.data(), cfg.horizon, lm.stats);
    for (std::int64_t h = 0; h < cfg.horizon; ++h)
        for (std::int64_t p = 0; p < cfg.synth_p; ++p)
            CHECK(fc.at(h, p) ==
                  doctest::Approx(yhat[static_cast<std::size_t>(h * cfg.synth_p + p)])
                      .epsilon(1e-12));

    // Forecasting twice produces identical files.
    run_forecast(tr.checkpoint_path, "/tmp/tstcd_fc_input.csv", 0, "/tmp/tstcd_fc_out2.csv");
    std::ifstream f1("/tmp/tstcd_fc_out.csv"), f2("/tmp/tstcd_fc_out2.csv");
    const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
}

TEST_CASE("ablation rows alter only the toggle keys") {
    RunConfig cfg = smoke_config();
    cfg.epochs = 1;
    run_ablate(cfg, "/tmp/tstcd_abl_audit");

    auto read_lines = [](const std::string& path) {
        std::ifstream in(path);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        return lines;
    };
    const std::vector<std::string> base = read_lines("/tmp/tstcd_abl_audit/full/config.txt");
    REQUIRE(!base.empty());
    for (const char* row : {"dag_only", "feature_only", "ot_only"}) {
        const auto other = read_lines(std::string("/tmp/tstcd_abl_audit/") + row + "/config.txt");
        REQUIRE(other.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            if (base[i] != other[i]) {
                CHECK(base[i].rfind("ablation.", 0) == 0);
            }
        }
    }

    // Four data rows in the emitted table.
    const auto table = read_lines("/tmp/tstcd_abl_audit/ablation.csv");
    CHECK(table.size() == 5);
}

TEST_CASE("forecast input shorter than the lookback errors") {
    RunConfig cfg = smoke_config();
    cfg.epochs = 1;
    TrainResult tr = run_train(cfg, "/tmp/tstcd_short_run");
    SeriesTable tiny = synth_generate(1, 4, 2, cfg.synth_spec());
    save_csv(tiny, "/tmp/tstcd_short.csv");
    CHECK_THROWS_WITH_AS(run_forecast(tr.checkpoint_path, "/tmp/tstcd_short.csv", 0, "/tmp/x.csv"),
                         doctest::Contains("too short"), ConfigError);
}
