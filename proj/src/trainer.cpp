// SPDX-License-Identifier: Apache-2.0

#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "subspace.hpp"

namespace tstcd {

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

SeriesTable load_or_synth(const RunConfig& cfg) {
    if (cfg.data_source == "csv") return load_csv(cfg.csv_path);
    return synth_generate(cfg.synth_seed, cfg.synth_t, cfg.synth_p, cfg.synth_spec());
}

Batch make_batch(const WindowSet& ws, const std::vector<std::int64_t>& order, std::int64_t begin,
                 std::int64_t end) {
    Batch b;
    b.n_variates = ws.P;
    for (std::int64_t i = begin; i < end; ++i) {
        b.inputs.push_back(ws.input(order[static_cast<std::size_t>(i)]));
        b.targets.push_back(ws.target(order[static_cast<std::size_t>(i)]));
    }
    return b;
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
    PreparedData d;
    d.raw = load_or_synth(cfg);
    d.raw_splits = chrono_split(d.raw, SplitRatios{cfg.split_train, cfg.split_val, cfg.split_test});
    d.normalized = cfg.normalize;

    SeriesTable train = d.raw_splits.train, val = d.raw_splits.val, test = d.raw_splits.test;
    if (cfg.normalize) {
        d.stats = compute_stats(d.raw_splits.train);
        train = normalize(train, d.stats);
        if (val.length() > 0) val = normalize(val, d.stats);
        test = normalize(test, d.stats);
    } else {
        d.stats.mean.assign(static_cast<std::size_t>(d.raw.variates()), 0.0);
        d.stats.std.assign(static_cast<std::size_t>(d.raw.variates()), 1.0);
    }

    d.train_windows = window_split(train, cfg.lookback, cfg.horizon, cfg.stride);
    if (val.length() >= cfg.lookback + cfg.horizon) {
        d.val_windows = window_split(val, cfg.lookback, cfg.horizon, cfg.stride);
    }
    d.test_windows = window_split(test, cfg.lookback, cfg.horizon, cfg.stride);
    return d;
}

TensorPtr build_anchor_embedding(const RunConfig& cfg) {
    TensorPtr vocab = make_synthetic_vocab(cfg.vocab_seed, cfg.vocab_size, cfg.width);
    QrReduceOptions opt;
    opt.rank_tol = cfg.rank_tol;
    opt.pivoted = cfg.vocab_pivoted;
    PrincipalEmbedding pe = qr_reduce(vocab, opt);
    if (cfg.max_anchor_tokens > 0 && pe.rank > cfg.max_anchor_tokens) {
        opt.d = cfg.max_anchor_tokens;
        pe = qr_reduce(vocab, opt);
    }
    return pe.dhat;
}

std::unique_ptr<DistillModel> build_model(const RunConfig& cfg) {
    cfg.validate();
    return std::make_unique<DistillModel>(cfg.model_config(), build_anchor_embedding(cfg), cfg.seed);
}

TrainResult run_train(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    PreparedData data = prepare_data(cfg);
    std::unique_ptr<DistillModel> model = build_model(cfg);
    AdamOptimizer optimizer(cfg.lr);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::int64_t> order(static_cast<std::size_t>(data.train_windows.count()));
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        EpochRecord rec;
        std::int64_t steps = 0;
        for (std::int64_t begin = 0; begin < data.train_windows.count(); begin += cfg.batch) {
            const std::int64_t end = std::min(begin + cfg.batch, data.train_windows.count());
            Batch batch = make_batch(data.train_windows, order, begin, end);
            LossBreakdown losses;
            try {
                losses = train_step(*model, batch, optimizer);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch + 1) + ", step " +
                                   std::to_string(steps + 1) + ": " + e.what());
            }
            rec.task += losses.task;
            rec.feature += losses.feature;
            rec.ot += losses.ot;
            rec.total += losses.total;
            ++steps;
        }
        rec.task /= static_cast<double>(steps);
        rec.feature /= static_cast<double>(steps);
        rec.ot /= static_cast<double>(steps);
        rec.total /= static_cast<double>(steps);
        result.trace.push_back(rec);
    }

    result.trace_path = out_dir + "/trace.jsonl";
    {
        std::ofstream out(result.trace_path);
        if (!out) throw IoError("cannot write " + result.trace_path);
        for (const auto& rec : result.trace) {
            out << "{\"task\":" << fmt(rec.task) << ",\"feature\":" << fmt(rec.feature)
                << ",\"ot\":" << fmt(rec.ot) << ",\"total\":" << fmt(rec.total) << "}\n";
        }
    }

    cfg.save_file(out_dir + "/config.txt");
    result.checkpoint_path = out_dir + "/checkpoint.tstcd";
    save_model_checkpoint(*model, data.stats, data.normalized, result.checkpoint_path);
    return result;
}

void save_model_checkpoint(const DistillModel& model, const NormStats& stats, bool normalized,
                           const std::string& path) {
    const ModelConfig& mc = model.config();
    Checkpoint ck;
    ck.add_scalar("meta.width", static_cast<double>(mc.backbone.M));
    ck.add_scalar("meta.layers", static_cast<double>(mc.backbone.n_layers));
    ck.add_scalar("meta.heads", static_cast<double>(mc.backbone.n_heads));
    ck.add_scalar("meta.ffn_mult", static_cast<double>(mc.backbone.ffn_mult));
    ck.add_scalar("meta.lookback", static_cast<double>(mc.backbone.L));
    ck.add_scalar("meta.horizon", static_cast<double>(mc.horizon));
    ck.add_scalar("meta.lora_rank", static_cast<double>(mc.lora_rank));
    ck.add_scalar("meta.lora_scale", mc.lora_scale);
    ck.add_scalar("meta.prompt_len", static_cast<double>(mc.prompt_len));
    ck.add_scalar("meta.normalize", normalized ? 1.0 : 0.0);
    ck.add_scalar("meta.variates", static_cast<double>(stats.mean.size()));
    ck.add_vector("norm.mean", stats.mean);
    ck.add_vector("norm.std", stats.std);
    if (model.principal_embedding()) ck.add("subspace.dhat", model.principal_embedding());
    for (const auto& p : model.parameters()) ck.add("param." + p.name, p.tensor);
    ck.save(path);
}

LoadedModel load_model_checkpoint(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);

    ModelConfig mc;
    mc.backbone.M = static_cast<std::int64_t>(ck.scalar("meta.width"));
    mc.backbone.n_layers = static_cast<std::int64_t>(ck.scalar("meta.layers"));
    mc.backbone.n_heads = static_cast<std::int64_t>(ck.scalar("meta.heads"));
    mc.backbone.ffn_mult = static_cast<std::int64_t>(ck.scalar("meta.ffn_mult"));
    mc.backbone.L = static_cast<std::int64_t>(ck.scalar("meta.lookback"));
    mc.horizon = static_cast<std::int64_t>(ck.scalar("meta.horizon"));
    mc.lora_rank = static_cast<std::int64_t>(ck.scalar("meta.lora_rank"));
    mc.lora_scale = ck.scalar("meta.lora_scale");
    mc.prompt_len = static_cast<std::int64_t>(ck.scalar("meta.prompt_len"));

    TensorPtr dhat;
    if (const CheckpointEntry* e = ck.find("subspace.dhat")) {
        dhat = Tensor::from(e->shape, e->data, false);
    }

    LoadedModel lm;
    lm.model = std::make_unique<DistillModel>(mc, dhat, /*seed=*/0);
    for (auto& p : lm.model->parameters()) {
        const CheckpointEntry& e = ck.require("param." + p.name);
        if (e.shape != p.tensor->shape) {
            throw ParseError("checkpoint: tensor \"param." + p.name + "\" has shape " +
                             shape_to_string(e.shape) + ", expected " + p.tensor->shape_str());
        }
        p.tensor->data = e.data;
    }

    lm.normalized = ck.scalar("meta.normalize") != 0.0;
    lm.stats.mean = ck.require("norm.mean").data;
    lm.stats.std = ck.require("norm.std").data;
    return lm;
}

MetricsReport run_eval(const std::string& checkpoint_path, const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    LoadedModel lm = load_model_checkpoint(checkpoint_path);
    DistillModel& model = *lm.model;
    const std::int64_t L = model.config().backbone.L;
    const std::int64_t H = model.config().horizon;

    // Raw-scale test windows; normalization uses the stats stored with the
    // model, matching the training protocol.
    SeriesTable raw = load_or_synth(cfg);
    SeriesSplits splits = chrono_split(raw, SplitRatios{cfg.split_train, cfg.split_val, cfg.split_test});
    if (static_cast<std::int64_t>(lm.stats.mean.size()) != raw.variates()) {
        throw ConfigError("eval: data has " + std::to_string(raw.variates()) +
                          " variates, checkpoint was trained with " +
                          std::to_string(lm.stats.mean.size()));
    }
    WindowSet test_raw = window_split(splits.test, L, H, cfg.stride);
    if (test_raw.count() == 0) throw ConfigError("eval: empty test split");

    const std::int64_t P = test_raw.P;
    const std::int64_t m_season = std::max<std::int64_t>(1, cfg.seasonality);

    std::vector<double> pred_all, target_all;
    std::vector<std::vector<double>> pred_by_var(static_cast<std::size_t>(P));
    std::vector<std::vector<double>> target_by_var(static_cast<std::size_t>(P));
    std::vector<std::vector<double>> naive2_by_var(static_cast<std::size_t>(P));
    std::vector<double> naive2_all;
    std::vector<double> ph_mse(static_cast<std::size_t>(H), 0.0), ph_mae(static_cast<std::size_t>(H), 0.0);

    for (std::int64_t i = 0; i < test_raw.count(); ++i) {
        // Normalize the raw input window with the stored stats, predict, then
        // bring predictions back to the raw scale.
        std::vector<double> win(test_raw.input(i), test_raw.input(i) + L * P);
        if (lm.normalized) {
            for (std::int64_t t = 0; t < L; ++t)
                for (std::int64_t p = 0; p < P; ++p)
                    win[static_cast<std::size_t>(t * P + p)] =
                        (win[static_cast<std::size_t>(t * P + p)] - lm.stats.mean[static_cast<std::size_t>(p)]) /
                        lm.stats.std[static_cast<std::size_t>(p)];
        }
        Graph g;
        TensorPtr window = Tensor::from({L, P}, std::move(win), false);
        TensorPtr pred = model.forward_infer(g, window);
        std::vector<double> yhat = pred->data;  // H x P
        if (lm.normalized) denormalize_rows(yhat.data(), H, lm.stats);

        const double* target = test_raw.target(i);
        for (std::int64_t h = 0; h < H; ++h) {
            for (std::int64_t p = 0; p < P; ++p) {
                const double pv = yhat[static_cast<std::size_t>(h * P + p)];
                const double tv = target[h * P + p];
                pred_all.push_back(pv);
                target_all.push_back(tv);
                pred_by_var[static_cast<std::size_t>(p)].push_back(pv);
                target_by_var[static_cast<std::size_t>(p)].push_back(tv);
                const double e = pv - tv;
                ph_mse[static_cast<std::size_t>(h)] += e * e;
                ph_mae[static_cast<std::size_t>(h)] += std::fabs(e);
            }
        }

        if (cfg.seasonality >= 1) {
            // H x P buffer first so the flat order matches target_all.
            std::vector<double> nf_window(static_cast<std::size_t>(H * P));
            for (std::int64_t p = 0; p < P; ++p) {
                std::vector<double> history(static_cast<std::size_t>(L));
                for (std::int64_t t = 0; t < L; ++t) history[static_cast<std::size_t>(t)] = test_raw.input(i)[t * P + p];
                const std::vector<double> nf = naive2_forecast(history, m_season, H);
                for (std::int64_t h = 0; h < H; ++h) {
                    nf_window[static_cast<std::size_t>(h * P + p)] = nf[static_cast<std::size_t>(h)];
                    naive2_by_var[static_cast<std::size_t>(p)].push_back(nf[static_cast<std::size_t>(h)]);
                }
            }
            naive2_all.insert(naive2_all.end(), nf_window.begin(), nf_window.end());
        }
    }

    MetricsReport report;
    report.n_windows = test_raw.count();
    report.mse = metric_mse(pred_all, target_all);
    report.mae = metric_mae(pred_all, target_all);
    report.smape = metric_smape(pred_all, target_all);

    double mase_acc = 0.0;
    for (std::int64_t p = 0; p < P; ++p) {
        std::vector<double> in_sample(static_cast<std::size_t>(splits.train.length()));
        for (std::int64_t t = 0; t < splits.train.length(); ++t)
            in_sample[static_cast<std::size_t>(t)] = splits.train.at(t, p);
        mase_acc += metric_mase(pred_by_var[static_cast<std::size_t>(p)],
                                target_by_var[static_cast<std::size_t>(p)], in_sample, m_season);
    }
    report.mase = mase_acc / static_cast<double>(P);

    if (cfg.seasonality >= 1) {
        // naive2 goes through the same metric pipeline; OWA averages the ratios.
        const double smape_n2 = metric_smape(naive2_all, target_all);
        double mase_n2_acc = 0.0;
        for (std::int64_t p = 0; p < P; ++p) {
            std::vector<double> in_sample(static_cast<std::size_t>(splits.train.length()));
            for (std::int64_t t = 0; t < splits.train.length(); ++t)
                in_sample[static_cast<std::size_t>(t)] = splits.train.at(t, p);
            mase_n2_acc += metric_mase(naive2_by_var[static_cast<std::size_t>(p)],
                                       target_by_var[static_cast<std::size_t>(p)], in_sample, m_season);
        }
        const double mase_n2 = mase_n2_acc / static_cast<double>(P);
        if (smape_n2 > 0.0 && mase_n2 > 0.0) {
            report.owa = 0.5 * (report.smape / smape_n2 + report.mase / mase_n2);
        }
    }

    const double denom = static_cast<double>(test_raw.count() * P);
    for (std::int64_t h = 0; h < H; ++h) {
        report.per_horizon_mse.push_back(ph_mse[static_cast<std::size_t>(h)] / denom);
        report.per_horizon_mae.push_back(ph_mae[static_cast<std::size_t>(h)] / denom);
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void run_forecast(const std::string& checkpoint_path, const std::string& input_csv,
                  std::int64_t horizon, const std::string& out_csv) {
    LoadedModel lm = load_model_checkpoint(checkpoint_path);
    DistillModel& model = *lm.model;
    const std::int64_t L = model.config().backbone.L;
    const std::int64_t H_model = model.config().horizon;
    if (horizon == 0) horizon = H_model;
    if (horizon < 1 || horizon > H_model) {
        throw ConfigError("forecast: horizon " + std::to_string(horizon) +
                          " exceeds the trained horizon " + std::to_string(H_model));
    }

    SeriesTable table = load_csv(input_csv);
    const std::int64_t P = table.variates();
    if (static_cast<std::int64_t>(lm.stats.mean.size()) != P) {
        throw ConfigError("forecast: input has " + std::to_string(P) +
                          " variates, checkpoint was trained with " +
                          std::to_string(lm.stats.mean.size()));
    }
    if (table.length() < L) {
        throw ConfigError("forecast: input too short, needs at least " + std::to_string(L) +
                          " rows, got " + std::to_string(table.length()));
    }

    std::vector<double> win(static_cast<std::size_t>(L * P));
    const std::int64_t start = table.length() - L;
    for (std::int64_t t = 0; t < L; ++t)
        for (std::int64_t p = 0; p < P; ++p) {
            double v = table.at(start + t, p);
            if (lm.normalized) {
                v = (v - lm.stats.mean[static_cast<std::size_t>(p)]) /
                    lm.stats.std[static_cast<std::size_t>(p)];
            }
            win[static_cast<std::size_t>(t * P + p)] = v;
        }

    Graph g;
    TensorPtr pred = model.forward_infer(g, Tensor::from({L, P}, std::move(win), false));
    std::vector<double> yhat = pred->data;
    if (lm.normalized) denormalize_rows(yhat.data(), H_model, lm.stats);

    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot write " + out_csv);
    out << "h";
    for (const auto& name : table.variate_names) out << ',' << name;
    out << '\n';
    for (std::int64_t h = 0; h < horizon; ++h) {
        out << (h + 1);
        for (std::int64_t p = 0; p < P; ++p) out << ',' << fmt(yhat[static_cast<std::size_t>(h * P + p)]);
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + out_csv);
}

std::vector<AblationRow> run_ablate(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    struct RowSpec {
        const char* name;
        bool dag, feature, ot;
    };
    const RowSpec rows_spec[] = {
        {"dag_only", true, false, false},
        {"feature_only", false, true, false},
        {"ot_only", false, false, true},
        {"full", true, true, true},
    };

    std::vector<AblationRow> rows;
    for (const RowSpec& rs : rows_spec) {
        RunConfig row_cfg = cfg;
        row_cfg.ablation_dag = rs.dag;
        row_cfg.ablation_feature = rs.feature;
        row_cfg.ablation_ot = rs.ot;
        const std::string row_dir = out_dir + "/" + rs.name;
        TrainResult tr = run_train(row_cfg, row_dir);
        AblationRow row;
        row.name = rs.name;
        row.dag = rs.dag;
        row.feature = rs.feature;
        row.ot = rs.ot;
        row.metrics = run_eval(tr.checkpoint_path, row_cfg);
        rows.push_back(std::move(row));
    }

    std::ofstream out(out_dir + "/ablation.csv");
    if (!out) throw IoError("cannot write " + out_dir + "/ablation.csv");
    out << "row,dag,feature,ot,smape,mase,owa,mse,mae\n";
    for (const auto& r : rows) {
        out << r.name << ',' << (r.dag ? 1 : 0) << ',' << (r.feature ? 1 : 0) << ',' << (r.ot ? 1 : 0)
            << ',' << fmt(r.metrics.smape) << ',' << fmt(r.metrics.mase) << ','
            << (r.metrics.owa ? fmt(*r.metrics.owa) : "") << ',' << fmt(r.metrics.mse) << ','
            << fmt(r.metrics.mae) << '\n';
    }
    return rows;
}

std::string ablation_table_json(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i) os << ',';
        os << "{\"row\":\"" << rows[i].name << "\",\"dag\":" << (rows[i].dag ? "true" : "false")
           << ",\"feature\":" << (rows[i].feature ? "true" : "false")
           << ",\"ot\":" << (rows[i].ot ? "true" : "false") << ",\"metrics\":" << rows[i].metrics.to_json()
           << '}';
    }
    os << ']';
    return os.str();
}

GradCheckReport run_grad_check(const RunConfig& cfg, int max_coords, double epsilon) {
    cfg.validate();
    PreparedData data = prepare_data(cfg);
    std::unique_ptr<DistillModel> model = build_model(cfg);

    const std::int64_t n = std::min<std::int64_t>(cfg.batch, data.train_windows.count());
    std::vector<std::int64_t> order(static_cast<std::size_t>(data.train_windows.count()));
    std::iota(order.begin(), order.end(), 0);
    Batch batch = make_batch(data.train_windows, order, 0, n);

    std::vector<std::pair<std::string, TensorPtr>> params;
    for (const auto& p : model->trainable_parameters()) params.emplace_back(p.name, p.tensor);

    GradCheckOptions options;
    options.epsilon = epsilon;
    options.max_coords = max_coords;
    options.tolerance = 1e-4;
    options.denom_floor = 1e-4;
    options.seed = cfg.seed;
    DistillModel& m = *model;
    return grad_check(
        [&m, &batch](Graph& g) { return m.forward_train(g, batch).total; }, params, options);
}

void run_synth(const RunConfig& cfg, const std::string& out_csv) {
    SeriesTable table = synth_generate(cfg.synth_seed, cfg.synth_t, cfg.synth_p, cfg.synth_spec());
    save_csv(table, out_csv);
}

}  // namespace tstcd
