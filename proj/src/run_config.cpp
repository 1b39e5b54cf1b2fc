// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "errors.hpp"

namespace tstcd {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config: " + key + " expects a number, got \"" + value + "\"");
    }
    return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config: " + key + " expects an integer, got \"" + value + "\"");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config: " + key + " expects a nonnegative integer, got \"" + value + "\"");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: " + key + " expects true or false, got \"" + value + "\"");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::string cur;
    std::istringstream in(value);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (cur.empty()) throw ConfigError("config: " + key + " has an empty list element");
        out.push_back(parse_double(key, cur));
    }
    if (out.empty()) throw ConfigError("config: " + key + " expects a comma-separated list");
    return out;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt(v[i]);
    }
    return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "data.source") {
        if (v != "synth" && v != "csv") throw ConfigError("config: data.source must be synth or csv");
        data_source = v;
    } else if (key == "data.csv_path") {
        csv_path = v;
    } else if (key == "synth.seed") {
        synth_seed = parse_u64(key, v);
    } else if (key == "synth.length") {
        synth_t = parse_int(key, v);
    } else if (key == "synth.variates") {
        synth_p = parse_int(key, v);
    } else if (key == "synth.periods") {
        synth_periods = parse_list(key, v);
    } else if (key == "synth.amplitudes") {
        synth_amplitudes = parse_list(key, v);
    } else if (key == "synth.trend") {
        synth_trend = parse_double(key, v);
    } else if (key == "synth.noise_std") {
        synth_noise_std = parse_double(key, v);
    } else if (key == "data.normalize") {
        normalize = parse_bool(key, v);
    } else if (key == "split.train") {
        split_train = parse_double(key, v);
    } else if (key == "split.val") {
        split_val = parse_double(key, v);
    } else if (key == "split.test") {
        split_test = parse_double(key, v);
    } else if (key == "window.lookback") {
        lookback = parse_int(key, v);
    } else if (key == "window.horizon") {
        horizon = parse_int(key, v);
    } else if (key == "window.stride") {
        stride = parse_int(key, v);
    } else if (key == "backbone.width") {
        width = parse_int(key, v);
    } else if (key == "backbone.layers") {
        layers = parse_int(key, v);
    } else if (key == "backbone.heads") {
        heads = parse_int(key, v);
    } else if (key == "backbone.ffn_mult") {
        ffn_mult = parse_int(key, v);
    } else if (key == "vocab.seed") {
        vocab_seed = parse_u64(key, v);
    } else if (key == "vocab.size") {
        vocab_size = parse_int(key, v);
    } else if (key == "vocab.max_anchor_tokens") {
        max_anchor_tokens = parse_int(key, v);
    } else if (key == "vocab.rank_tol") {
        rank_tol = parse_double(key, v);
    } else if (key == "vocab.pivoted") {
        vocab_pivoted = parse_bool(key, v);
    } else if (key == "gating.prompt_len") {
        prompt_len = parse_int(key, v);
    } else if (key == "loss.tau") {
        tau = parse_double(key, v);
    } else if (key == "loss.gamma") {
        gamma = parse_double(key, v);
    } else if (key == "loss.alpha") {
        alpha = parse_double(key, v);
    } else if (key == "loss.beta") {
        beta = parse_double(key, v);
    } else if (key == "loss.mu") {
        mu = parse_double(key, v);
    } else if (key == "loss.sinkhorn_iters") {
        sinkhorn_iters = static_cast<int>(parse_int(key, v));
    } else if (key == "loss.sinkhorn_tol") {
        sinkhorn_tol = parse_double(key, v);
    } else if (key == "loss.task") {
        if (v != "smooth_l1" && v != "smape" && v != "mse") {
            throw ConfigError("config: loss.task must be smooth_l1, smape or mse");
        }
        task = v;
    } else if (key == "loss.ot_cost") {
        if (v != "sqeuclidean" && v != "absolute") {
            throw ConfigError("config: loss.ot_cost must be sqeuclidean or absolute");
        }
        ot_cost = v;
    } else if (key == "loss.ot_axis") {
        if (v != "variate" && v != "horizon") {
            throw ConfigError("config: loss.ot_axis must be variate or horizon");
        }
        ot_axis = v;
    } else if (key == "loss.ot_unrolled") {
        ot_unrolled = parse_bool(key, v);
    } else if (key == "loss.teacher_task_weight") {
        teacher_task_weight = parse_double(key, v);
    } else if (key == "lora.rank") {
        lora_rank = parse_int(key, v);
    } else if (key == "lora.scale") {
        lora_scale = parse_double(key, v);
    } else if (key == "train.lr") {
        lr = parse_double(key, v);
    } else if (key == "train.epochs") {
        epochs = parse_int(key, v);
    } else if (key == "train.batch") {
        batch = parse_int(key, v);
    } else if (key == "train.seed") {
        seed = parse_u64(key, v);
    } else if (key == "eval.seasonality") {
        seasonality = parse_int(key, v);
    } else if (key == "ablation.dag") {
        ablation_dag = parse_bool(key, v);
    } else if (key == "ablation.feature") {
        ablation_feature = parse_bool(key, v);
    } else if (key == "ablation.ot") {
        ablation_ot = parse_bool(key, v);
    } else {
        throw ConfigError("config: unknown key \"" + key + "\"");
    }
}

std::string RunConfig::get(const std::string& key) const {
    // Serialize and look the key up; keeps get/serialize trivially consistent.
    std::istringstream in(serialize());
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        if (line.substr(0, eq) == key) return line.substr(eq + 3);
    }
    throw ConfigError("config: unknown key \"" + key + "\"");
}

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(line_no) + " is not key = value");
        }
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os << "data.source = " << data_source << '\n';
    os << "data.csv_path = " << csv_path << '\n';
    os << "data.normalize = " << (normalize ? "true" : "false") << '\n';
    os << "synth.seed = " << synth_seed << '\n';
    os << "synth.length = " << synth_t << '\n';
    os << "synth.variates = " << synth_p << '\n';
    os << "synth.periods = " << fmt_list(synth_periods) << '\n';
    os << "synth.amplitudes = " << fmt_list(synth_amplitudes) << '\n';
    os << "synth.trend = " << fmt(synth_trend) << '\n';
    os << "synth.noise_std = " << fmt(synth_noise_std) << '\n';
    os << "split.train = " << fmt(split_train) << '\n';
    os << "split.val = " << fmt(split_val) << '\n';
    os << "split.test = " << fmt(split_test) << '\n';
    os << "window.lookback = " << lookback << '\n';
    os << "window.horizon = " << horizon << '\n';
    os << "window.stride = " << stride << '\n';
    os << "backbone.width = " << width << '\n';
    os << "backbone.layers = " << layers << '\n';
    os << "backbone.heads = " << heads << '\n';
    os << "backbone.ffn_mult = " << ffn_mult << '\n';
    os << "vocab.seed = " << vocab_seed << '\n';
    os << "vocab.size = " << vocab_size << '\n';
    os << "vocab.max_anchor_tokens = " << max_anchor_tokens << '\n';
    os << "vocab.rank_tol = " << fmt(rank_tol) << '\n';
    os << "vocab.pivoted = " << (vocab_pivoted ? "true" : "false") << '\n';
    os << "gating.prompt_len = " << prompt_len << '\n';
    os << "loss.tau = " << fmt(tau) << '\n';
    os << "loss.gamma = " << fmt(gamma) << '\n';
    os << "loss.alpha = " << fmt(alpha) << '\n';
    os << "loss.beta = " << fmt(beta) << '\n';
    os << "loss.mu = " << fmt(mu) << '\n';
    os << "loss.sinkhorn_iters = " << sinkhorn_iters << '\n';
    os << "loss.sinkhorn_tol = " << fmt(sinkhorn_tol) << '\n';
    os << "loss.task = " << task << '\n';
    os << "loss.ot_cost = " << ot_cost << '\n';
    os << "loss.ot_axis = " << ot_axis << '\n';
    os << "loss.ot_unrolled = " << (ot_unrolled ? "true" : "false") << '\n';
    os << "loss.teacher_task_weight = " << fmt(teacher_task_weight) << '\n';
    os << "lora.rank = " << lora_rank << '\n';
    os << "lora.scale = " << fmt(lora_scale) << '\n';
    os << "train.lr = " << fmt(lr) << '\n';
    os << "train.epochs = " << epochs << '\n';
    os << "train.batch = " << batch << '\n';
    os << "train.seed = " << seed << '\n';
    os << "eval.seasonality = " << seasonality << '\n';
    os << "ablation.dag = " << (ablation_dag ? "true" : "false") << '\n';
    os << "ablation.feature = " << (ablation_feature ? "true" : "false") << '\n';
    os << "ablation.ot = " << (ablation_ot ? "true" : "false") << '\n';
    return os.str();
}

void RunConfig::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << serialize();
    if (!out) throw IoError("write failed for " + path);
}

void RunConfig::validate() const {
    if (data_source == "csv" && csv_path.empty()) {
        throw ConfigError("config: data.csv_path is required when data.source = csv");
    }
    if (lookback < 1 || horizon < 1 || stride < 1) {
        throw ConfigError("config: window.lookback, window.horizon and window.stride must be >= 1");
    }
    if (epochs < 1 || batch < 1) throw ConfigError("config: train.epochs and train.batch must be >= 1");
    if (lr < 0.0) throw ConfigError("config: train.lr must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("config: loss.tau must be positive");
    if (!(gamma > 0.0)) throw ConfigError("config: loss.gamma must be positive");
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("config: loss.alpha and loss.beta must be >= 0");
    if (!(mu > 0.0)) throw ConfigError("config: loss.mu must be positive");
    if (sinkhorn_iters < 1) throw ConfigError("config: loss.sinkhorn_iters must be >= 1");
    if (lora_rank < 0) throw ConfigError("config: lora.rank must be >= 0");
    if (max_anchor_tokens < 0) throw ConfigError("config: vocab.max_anchor_tokens must be >= 0");
    if (vocab_size < 1) throw ConfigError("config: vocab.size must be >= 1");
    if (!(rank_tol > 0.0)) throw ConfigError("config: vocab.rank_tol must be positive");
    if (prompt_len < 0) throw ConfigError("config: gating.prompt_len must be >= 0");
    if (seasonality < 0) throw ConfigError("config: eval.seasonality must be >= 0");
    ModelConfig mc = model_config();
    mc.backbone.validate();
}

TaskLossKind RunConfig::task_kind() const {
    if (task == "smooth_l1") return TaskLossKind::SmoothL1;
    if (task == "smape") return TaskLossKind::Smape;
    return TaskLossKind::Mse;
}

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.backbone.M = width;
    mc.backbone.n_layers = layers;
    mc.backbone.n_heads = heads;
    mc.backbone.ffn_mult = ffn_mult;
    mc.backbone.L = lookback;
    mc.horizon = horizon;
    mc.lora_rank = lora_rank;
    mc.lora_scale = lora_scale;
    mc.prompt_len = prompt_len;
    mc.tau = tau;
    mc.gamma = gamma;
    mc.alpha = alpha;
    mc.beta = beta;
    mc.teacher_task_weight = teacher_task_weight;
    mc.task_kind = task_kind();
    mc.ot.mu = mu;
    mc.ot.iters = sinkhorn_iters;
    mc.ot.tol = sinkhorn_tol;
    mc.ot.cost = (ot_cost == "absolute") ? OtCost::Absolute : OtCost::SqEuclidean;
    mc.ot.axis = (ot_axis == "horizon") ? OtAxis::Horizon : OtAxis::Variate;
    mc.ot.unrolled = ot_unrolled;
    mc.dag_enabled = ablation_dag;
    mc.feature_enabled = ablation_feature;
    mc.ot_enabled = ablation_ot;
    return mc;
}

SynthSpec RunConfig::synth_spec() const {
    SynthSpec spec;
    spec.periods = synth_periods;
    spec.amplitudes = synth_amplitudes;
    spec.trend = synth_trend;
    spec.noise_std = synth_noise_std;
    return spec;
}

}  // namespace tstcd
