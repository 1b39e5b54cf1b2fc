// SPDX-License-Identifier: Apache-2.0
//
// extern "C" boundary: exceptions from the core are caught here and turned
// into status codes plus a thread-local message.

#include "tstcd/tstcd.h"

#include <cstring>
#include <string>

#include "errors.hpp"
#include "run_config.hpp"
#include "series.hpp"
#include "trainer.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

tstcd_status to_status(const std::exception& e) {
    using namespace tstcd;
    g_last_error = e.what();
    if (dynamic_cast<const ConfigError*>(&e)) return TSTCD_ERR_CONFIG;
    if (dynamic_cast<const ParseError*>(&e)) return TSTCD_ERR_PARSE;
    if (dynamic_cast<const IoError*>(&e)) return TSTCD_ERR_IO;
    if (dynamic_cast<const NumericError*>(&e)) return TSTCD_ERR_NUMERIC;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return TSTCD_ERR_INVALID_ARGUMENT;
    return TSTCD_ERR_INTERNAL;
}

template <typename Fn>
tstcd_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return TSTCD_OK;
    } catch (const std::exception& e) {
        return to_status(e);
    } catch (...) {
        g_last_error = "unknown error";
        return TSTCD_ERR_INTERNAL;
    }
}

tstcd_status invalid(const char* msg) {
    g_last_error = msg;
    return TSTCD_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct tstcd_config {
    tstcd::RunConfig cfg;
};

struct tstcd_model {
    tstcd::LoadedModel loaded;
};

extern "C" {

const char* tstcd_version(void) { return "1.0.0"; }

const char* tstcd_last_error(void) { return g_last_error.c_str(); }

void tstcd_string_free(char* s) { delete[] s; }

tstcd_status tstcd_config_create(tstcd_config** out) {
    if (!out) return invalid("tstcd_config_create: out is null");
    return guarded([&] { *out = new tstcd_config{}; });
}

tstcd_status tstcd_config_load(const char* path, tstcd_config** out) {
    if (!path || !out) return invalid("tstcd_config_load: null argument");
    return guarded([&] { *out = new tstcd_config{tstcd::RunConfig::parse_file(path)}; });
}

tstcd_status tstcd_config_save(const tstcd_config* cfg, const char* path) {
    if (!cfg || !path) return invalid("tstcd_config_save: null argument");
    return guarded([&] { cfg->cfg.save_file(path); });
}

tstcd_status tstcd_config_set(tstcd_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return invalid("tstcd_config_set: null argument");
    return guarded([&] { cfg->cfg.set(key, value); });
}

tstcd_status tstcd_config_get(const tstcd_config* cfg, const char* key, char* buf, size_t buf_size) {
    if (!cfg || !key || !buf || buf_size == 0) return invalid("tstcd_config_get: null argument");
    return guarded([&] {
        const std::string v = cfg->cfg.get(key);
        if (v.size() + 1 > buf_size) {
            throw std::invalid_argument("tstcd_config_get: buffer of " + std::to_string(buf_size) +
                                        " bytes too small for value of " + std::to_string(v.size()));
        }
        std::memcpy(buf, v.c_str(), v.size() + 1);
    });
}

void tstcd_config_free(tstcd_config* cfg) { delete cfg; }

tstcd_status tstcd_synth(const tstcd_config* cfg, const char* out_csv) {
    if (!cfg || !out_csv) return invalid("tstcd_synth: null argument");
    return guarded([&] { tstcd::run_synth(cfg->cfg, out_csv); });
}

tstcd_status tstcd_train(const tstcd_config* cfg, const char* out_dir) {
    if (!cfg || !out_dir) return invalid("tstcd_train: null argument");
    return guarded([&] { tstcd::run_train(cfg->cfg, out_dir); });
}

tstcd_status tstcd_eval(const char* checkpoint_path, const tstcd_config* cfg, char** out_json) {
    if (!checkpoint_path || !cfg || !out_json) return invalid("tstcd_eval: null argument");
    return guarded([&] {
        const tstcd::MetricsReport report = tstcd::run_eval(checkpoint_path, cfg->cfg);
        *out_json = dup_string(report.to_json());
    });
}

tstcd_status tstcd_forecast(const char* checkpoint_path, const char* input_csv, long long horizon,
                            const char* out_csv) {
    if (!checkpoint_path || !input_csv || !out_csv) return invalid("tstcd_forecast: null argument");
    if (horizon < 0) return invalid("tstcd_forecast: horizon must be >= 0");
    return guarded([&] { tstcd::run_forecast(checkpoint_path, input_csv, horizon, out_csv); });
}

tstcd_status tstcd_ablate(const tstcd_config* cfg, const char* out_dir, char** out_json) {
    if (!cfg || !out_dir) return invalid("tstcd_ablate: null argument");
    return guarded([&] {
        const auto rows = tstcd::run_ablate(cfg->cfg, out_dir);
        if (out_json) *out_json = dup_string(tstcd::ablation_table_json(rows));
    });
}

tstcd_status tstcd_grad_check(const tstcd_config* cfg, int max_coords, double epsilon,
                              double* out_max_rel_err, int* out_coords_checked) {
    if (!cfg || !out_max_rel_err) return invalid("tstcd_grad_check: null argument");
    if (max_coords < 1) return invalid("tstcd_grad_check: max_coords must be >= 1");
    return guarded([&] {
        const tstcd::GradCheckReport report = tstcd::run_grad_check(cfg->cfg, max_coords, epsilon);
        *out_max_rel_err = report.max_rel_err;
        if (out_coords_checked) *out_coords_checked = report.coords_checked;
    });
}

tstcd_status tstcd_model_load(const char* checkpoint_path, tstcd_model** out) {
    if (!checkpoint_path || !out) return invalid("tstcd_model_load: null argument");
    return guarded([&] {
        auto* handle = new tstcd_model{};
        try {
            handle->loaded = tstcd::load_model_checkpoint(checkpoint_path);
        } catch (...) {
            delete handle;
            throw;
        }
        *out = handle;
    });
}

void tstcd_model_free(tstcd_model* model) { delete model; }

tstcd_status tstcd_model_info(const tstcd_model* model, char** out_json) {
    if (!model || !out_json) return invalid("tstcd_model_info: null argument");
    return guarded([&] {
        const tstcd::ModelConfig& mc = model->loaded.model->config();
        std::string json = "{\"width\":" + std::to_string(mc.backbone.M) +
                           ",\"layers\":" + std::to_string(mc.backbone.n_layers) +
                           ",\"heads\":" + std::to_string(mc.backbone.n_heads) +
                           ",\"lookback\":" + std::to_string(mc.backbone.L) +
                           ",\"horizon\":" + std::to_string(mc.horizon) +
                           ",\"variates\":" + std::to_string(model->loaded.stats.mean.size()) + "}";
        *out_json = dup_string(json);
    });
}

tstcd_status tstcd_model_forecast(const tstcd_model* model, const double* input, size_t input_len,
                                  double* out, size_t out_len) {
    if (!model || !input || !out) return invalid("tstcd_model_forecast: null argument");
    return guarded([&] {
        const tstcd::LoadedModel& lm = model->loaded;
        const std::int64_t L = lm.model->config().backbone.L;
        const std::int64_t H = lm.model->config().horizon;
        const std::int64_t P = static_cast<std::int64_t>(lm.stats.mean.size());
        if (static_cast<std::int64_t>(input_len) != L * P) {
            throw std::invalid_argument("tstcd_model_forecast: input length " +
                                        std::to_string(input_len) + ", expected " +
                                        std::to_string(L * P));
        }
        if (static_cast<std::int64_t>(out_len) != H * P) {
            throw std::invalid_argument("tstcd_model_forecast: output length " +
                                        std::to_string(out_len) + ", expected " +
                                        std::to_string(H * P));
        }
        std::vector<double> win(input, input + input_len);
        if (lm.normalized) {
            for (std::int64_t t = 0; t < L; ++t)
                for (std::int64_t p = 0; p < P; ++p)
                    win[static_cast<std::size_t>(t * P + p)] =
                        (win[static_cast<std::size_t>(t * P + p)] -
                         lm.stats.mean[static_cast<std::size_t>(p)]) /
                        lm.stats.std[static_cast<std::size_t>(p)];
        }
        tstcd::Graph g;
        tstcd::TensorPtr pred =
            lm.model->forward_infer(g, tstcd::Tensor::from({L, P}, std::move(win), false));
        std::vector<double> yhat = pred->data;
        if (lm.normalized) tstcd::denormalize_rows(yhat.data(), H, lm.stats);
        std::memcpy(out, yhat.data(), yhat.size() * sizeof(double));
    });
}

}  // extern "C"
