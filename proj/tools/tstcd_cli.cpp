// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the library exclusively through the C API.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tstcd/tstcd.h"

namespace {

struct ConfigHandle {
    tstcd_config* cfg = nullptr;
    ~ConfigHandle() { tstcd_config_free(cfg); }
};

int fail(tstcd_status status) {
    std::fprintf(stderr, "error: %s\n", tstcd_last_error());
    return static_cast<int>(status);
}

// Loads the config (or defaults), then applies --seed and --set overrides.
tstcd_status load_config(const std::string& config_path, long long seed_override,
                         const std::vector<std::string>& overrides, ConfigHandle& handle) {
    tstcd_status st = config_path.empty() ? tstcd_config_create(&handle.cfg)
                                          : tstcd_config_load(config_path.c_str(), &handle.cfg);
    if (st != TSTCD_OK) return st;
    if (seed_override >= 0) {
        st = tstcd_config_set(handle.cfg, "train.seed", std::to_string(seed_override).c_str());
        if (st != TSTCD_OK) return st;
    }
    for (const std::string& kv : overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got \"%s\"\n", kv.c_str());
            return TSTCD_ERR_INVALID_ARGUMENT;
        }
        st = tstcd_config_set(handle.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (st != TSTCD_OK) return st;
    }
    return TSTCD_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tstcd cross-modal distillation forecaster"};
    app.require_subcommand(1);

    std::string config_path, out_path, checkpoint_path, input_path;
    long long seed_override = -1;
    long long horizon = 0;
    int grad_coords = 200;
    double grad_epsilon = 1e-5;
    std::vector<std::string> overrides;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value lines)");
        cmd->add_option("--seed", seed_override, "override train.seed");
        cmd->add_option("--set", overrides, "override any config key, key=value")->take_all();
    };

    CLI::App* synth = app.add_subcommand("synth", "generate the configured synthetic series as CSV");
    add_common(synth);
    synth->add_option("--out", out_path, "output CSV path")->required();

    CLI::App* train = app.add_subcommand("train", "train and write checkpoint + loss trace");
    add_common(train);
    train->add_option("--out", out_path, "output directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured data");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();

    CLI::App* forecast = app.add_subcommand("forecast", "forecast from the last window of a CSV");
    forecast->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
    forecast->add_option("--input", input_path, "input CSV")->required();
    forecast->add_option("--horizon", horizon, "rows to emit (default: trained horizon)");
    forecast->add_option("--out", out_path, "output CSV path")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate the four component rows");
    add_common(ablate);
    ablate->add_option("--out", out_path, "output directory")->required();

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    add_common(gradcheck);
    gradcheck->add_option("--coords", grad_coords, "coordinates to sample");
    gradcheck->add_option("--epsilon", grad_epsilon, "central-difference step");

    CLI11_PARSE(app, argc, argv);

    ConfigHandle handle;
    tstcd_status st = TSTCD_OK;

    if (synth->parsed()) {
        if ((st = load_config(config_path, seed_override, overrides, handle)) != TSTCD_OK) return fail(st);
        if ((st = tstcd_synth(handle.cfg, out_path.c_str())) != TSTCD_OK) return fail(st);
        std::printf("wrote %s\n", out_path.c_str());
    } else if (train->parsed()) {
        if ((st = load_config(config_path, seed_override, overrides, handle)) != TSTCD_OK) return fail(st);
        if ((st = tstcd_train(handle.cfg, out_path.c_str())) != TSTCD_OK) return fail(st);
        std::printf("wrote %s/checkpoint.tstcd and %s/trace.jsonl\n", out_path.c_str(), out_path.c_str());
    } else if (eval->parsed()) {
        if ((st = load_config(config_path, seed_override, overrides, handle)) != TSTCD_OK) return fail(st);
        char* json = nullptr;
        if ((st = tstcd_eval(checkpoint_path.c_str(), handle.cfg, &json)) != TSTCD_OK) return fail(st);
        std::printf("%s\n", json);
        tstcd_string_free(json);
    } else if (forecast->parsed()) {
        if ((st = tstcd_forecast(checkpoint_path.c_str(), input_path.c_str(), horizon,
                                 out_path.c_str())) != TSTCD_OK)
            return fail(st);
        std::printf("wrote %s\n", out_path.c_str());
    } else if (ablate->parsed()) {
        if ((st = load_config(config_path, seed_override, overrides, handle)) != TSTCD_OK) return fail(st);
        char* json = nullptr;
        if ((st = tstcd_ablate(handle.cfg, out_path.c_str(), &json)) != TSTCD_OK) return fail(st);
        std::printf("%s\n", json);
        tstcd_string_free(json);
        std::printf("wrote %s/ablation.csv\n", out_path.c_str());
    } else if (gradcheck->parsed()) {
        if ((st = load_config(config_path, seed_override, overrides, handle)) != TSTCD_OK) return fail(st);
        double max_rel_err = 0.0;
        int checked = 0;
        if ((st = tstcd_grad_check(handle.cfg, grad_coords, grad_epsilon, &max_rel_err, &checked)) !=
            TSTCD_OK)
            return fail(st);
        std::printf("{\"coords_checked\":%d,\"max_rel_err\":%.17g}\n", checked, max_rel_err);
    }
    return 0;
}
