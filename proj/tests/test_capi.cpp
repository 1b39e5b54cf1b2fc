// SPDX-License-Identifier: Apache-2.0
//
// Exercises the shared-library surface the way an external caller would.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tstcd/tstcd.h"

namespace {

struct Config {
    tstcd_config* h = nullptr;
    Config() { REQUIRE(tstcd_config_create(&h) == TSTCD_OK); }
    ~Config() { tstcd_config_free(h); }
    void set(const char* k, const char* v) { REQUIRE(tstcd_config_set(h, k, v) == TSTCD_OK); }
};

void make_smoke_config(Config& cfg) {
    cfg.set("synth.length", "80");
    cfg.set("synth.variates", "2");
    cfg.set("synth.trend", "0");
    cfg.set("window.lookback", "8");
    cfg.set("window.horizon", "4");
    cfg.set("backbone.width", "8");
    cfg.set("backbone.layers", "2");
    cfg.set("backbone.heads", "2");
    cfg.set("backbone.ffn_mult", "2");
    cfg.set("gating.prompt_len", "2");
    cfg.set("lora.rank", "2");
    cfg.set("vocab.size", "32");
    cfg.set("vocab.max_anchor_tokens", "6");
    cfg.set("loss.sinkhorn_iters", "30");
    cfg.set("train.epochs", "5");
    cfg.set("train.batch", "8");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("version and config get/set round trip") {
    CHECK(std::string(tstcd_version()).find('.') != std::string::npos);

    Config cfg;
    cfg.set("loss.alpha", "0.25");
    char buf[64];
    REQUIRE(tstcd_config_get(cfg.h, "loss.alpha", buf, sizeof(buf)) == TSTCD_OK);
    CHECK(std::string(buf) == "0.25");

    CHECK(tstcd_config_set(cfg.h, "not.a.key", "1") == TSTCD_ERR_CONFIG);
    CHECK(std::string(tstcd_last_error()).find("not.a.key") != std::string::npos);

    char tiny[2];
    CHECK(tstcd_config_get(cfg.h, "loss.alpha", tiny, sizeof(tiny)) == TSTCD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("null arguments are invalid, not crashes") {
    CHECK(tstcd_config_create(nullptr) == TSTCD_ERR_INVALID_ARGUMENT);
    CHECK(tstcd_train(nullptr, "/tmp/x") == TSTCD_ERR_INVALID_ARGUMENT);
    CHECK(tstcd_model_load(nullptr, nullptr) == TSTCD_ERR_INVALID_ARGUMENT);
    CHECK(std::string(tstcd_last_error()).size() > 0);
}

TEST_CASE("config file save and load through the boundary") {
    Config cfg;
    cfg.set("train.epochs", "17");
    REQUIRE(tstcd_config_save(cfg.h, "/tmp/tstcd_capi_cfg.txt") == TSTCD_OK);

    tstcd_config* loaded = nullptr;
    REQUIRE(tstcd_config_load("/tmp/tstcd_capi_cfg.txt", &loaded) == TSTCD_OK);
    char buf[32];
    REQUIRE(tstcd_config_get(loaded, "train.epochs", buf, sizeof(buf)) == TSTCD_OK);
    CHECK(std::string(buf) == "17");
    tstcd_config_free(loaded);

    tstcd_config* missing = nullptr;
    CHECK(tstcd_config_load("/tmp/definitely_missing_cfg.txt", &missing) == TSTCD_ERR_IO);
}

TEST_CASE("train, eval, forecast and model handles through the C API") {
    Config cfg;
    make_smoke_config(cfg);

    REQUIRE(tstcd_train(cfg.h, "/tmp/tstcd_capi_run") == TSTCD_OK);

    // Five epochs produce exactly five trace records.
    const std::string trace = slurp("/tmp/tstcd_capi_run/trace.jsonl");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 5);
    CHECK(trace.find("\"task\":") != std::string::npos);
    CHECK(trace.find("\"feature\":") != std::string::npos);
    CHECK(trace.find("\"ot\":") != std::string::npos);
    CHECK(trace.find("\"total\":") != std::string::npos);

    char* metrics_json = nullptr;
    REQUIRE(tstcd_eval("/tmp/tstcd_capi_run/checkpoint.tstcd", cfg.h, &metrics_json) == TSTCD_OK);
    CHECK(std::string(metrics_json).find("\"mse\":") != std::string::npos);
    tstcd_string_free(metrics_json);

    // Forecast needs an input CSV; synthesize one with the same generator.
    REQUIRE(tstcd_synth(cfg.h, "/tmp/tstcd_capi_input.csv") == TSTCD_OK);
    REQUIRE(tstcd_forecast("/tmp/tstcd_capi_run/checkpoint.tstcd", "/tmp/tstcd_capi_input.csv", 0,
                           "/tmp/tstcd_capi_fc.csv") == TSTCD_OK);
    const std::string fc = slurp("/tmp/tstcd_capi_fc.csv");
    CHECK(std::count(fc.begin(), fc.end(), '\n') == 5);  // header + horizon rows
    CHECK(fc.rfind("h,", 0) == 0);

    // Model handle: info and an in-memory forecast of the right length.
    tstcd_model* model = nullptr;
    REQUIRE(tstcd_model_load("/tmp/tstcd_capi_run/checkpoint.tstcd", &model) == TSTCD_OK);
    char* info = nullptr;
    REQUIRE(tstcd_model_info(model, &info) == TSTCD_OK);
    CHECK(std::string(info).find("\"lookback\":8") != std::string::npos);
    tstcd_string_free(info);

    std::vector<double> window(8 * 2, 0.5);
    std::vector<double> out(4 * 2, 0.0);
    REQUIRE(tstcd_model_forecast(model, window.data(), window.size(), out.data(), out.size()) ==
            TSTCD_OK);
    CHECK(tstcd_model_forecast(model, window.data(), window.size() - 1, out.data(), out.size()) ==
          TSTCD_ERR_INVALID_ARGUMENT);
    tstcd_model_free(model);

    // Horizon beyond the trained one is a config error.
    CHECK(tstcd_forecast("/tmp/tstcd_capi_run/checkpoint.tstcd", "/tmp/tstcd_capi_input.csv", 99,
                         "/tmp/tstcd_capi_fc2.csv") == TSTCD_ERR_CONFIG);
}

TEST_CASE("gradient check through the C API") {
    Config cfg;
    make_smoke_config(cfg);
    double max_rel = 1.0;
    int checked = 0;
    REQUIRE(tstcd_grad_check(cfg.h, 40, 1e-5, &max_rel, &checked) == TSTCD_OK);
    CHECK(checked == 40);
    CHECK(max_rel < 1e-4);
}

TEST_CASE("corrupt checkpoint is a parse error") {
    std::ofstream out("/tmp/tstcd_capi_bad.tstcd", std::ios::binary);
    out << "garbage";
    out.close();
    tstcd_model* model = nullptr;
    CHECK(tstcd_model_load("/tmp/tstcd_capi_bad.tstcd", &model) == TSTCD_ERR_PARSE);
}
