// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: each criterion runs at its stated tolerance and prints
// one PASS/FAIL line; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "errors.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "run_config.hpp"
#include "series.hpp"
#include "subspace.hpp"
#include "tensor.hpp"
#include "trainer.hpp"

using namespace tstcd;

namespace {

int g_failures = 0;

class Criterion {
public:
    explicit Criterion(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

    void expect(bool ok, const std::string& detail) {
        if (!ok && failure_.empty()) failure_ = detail;
        ok_ = ok_ && ok;
    }

    void finish(const std::string& summary = "") {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        if (ok_) {
            std::printf("PASS %-24s %s(%.1fs)\n", name_.c_str(),
                        summary.empty() ? "" : (summary + " ").c_str(), secs);
        } else {
            std::printf("FAIL %-24s %s (%.1fs)\n", name_.c_str(), failure_.c_str(), secs);
            ++g_failures;
        }
        std::fflush(stdout);
    }

    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::string name_;
    bool ok_ = true;
    std::string failure_;
    std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// The pinned synthetic benchmark, mirrored in configs/pinned_synthetic.txt.
RunConfig pinned_benchmark() {
    RunConfig cfg;
    cfg.synth_seed = 41;
    cfg.synth_t = 280;
    cfg.synth_p = 3;
    cfg.synth_periods = {24.0, 36.0, 1000000.0};
    cfg.synth_amplitudes = {1.0, 0.6, 6.0};
    cfg.synth_trend = 0.0;
    cfg.synth_noise_std = 0.5;
    cfg.split_train = 0.5;
    cfg.split_val = 0.1;
    cfg.split_test = 0.4;
    cfg.lookback = 32;
    cfg.horizon = 8;
    cfg.epochs = 200;
    cfg.seed = 11;
    cfg.seasonality = 24;
    return cfg;
}

// Tiny config for the gradient-fidelity criterion.
RunConfig tiny_grad_config() {
    RunConfig cfg;
    cfg.synth_t = 60;
    cfg.synth_p = 3;
    cfg.synth_trend = 0.0;
    cfg.synth_noise_std = 0.2;
    cfg.lookback = 8;
    cfg.horizon = 4;
    cfg.width = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ffn_mult = 2;
    cfg.prompt_len = 4;
    cfg.lora_rank = 2;
    cfg.vocab_size = 64;
    cfg.max_anchor_tokens = 8;
    cfg.batch = 8;
    cfg.sinkhorn_iters = 60;
    return cfg;
}

void criterion_gradient_fidelity() {
    Criterion c("gradient-fidelity");
    const GradCheckReport report = run_grad_check(tiny_grad_config(), 200, 1e-5);
    c.expect(report.coords_checked >= 200,
             "only " + std::to_string(report.coords_checked) + " coordinates checked");
    c.expect(report.max_rel_err < 1e-4,
             "max relative error " + fmt(report.max_rel_err) + " at " + report.worst.param);
    c.expect(c.seconds() < 60.0, "runtime over 60 s");
    c.finish("max_rel_err=" + fmt(report.max_rel_err) +
             " coords=" + std::to_string(report.coords_checked));
}

void criterion_loss_closed_forms() {
    Criterion c("loss-closed-forms");
    Graph g;

    // Uniform similarities: ln K for K = 2 and K = 3.
    auto f2 = Tensor::from({2, 3}, {1, 2, 3, 1, 2, 3});
    c.expect(std::fabs(info_nce(g, f2, f2, 0.5)->item() - std::log(2.0)) < 1e-12,
             "info_nce uniform K=2");
    auto f3 = Tensor::from({3, 2}, {1, 1, 1, 1, 1, 1});
    c.expect(std::fabs(info_nce(g, f3, f3, 0.3)->item() - std::log(3.0)) < 1e-12,
             "info_nce uniform K=3");

    // Orthogonal negatives at tau = 1: ln(1 + e^{-1}).
    auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    c.expect(std::fabs(info_nce(g, eye, eye, 1.0)->item() - std::log(1.0 + std::exp(-1.0))) < 1e-12,
             "info_nce two-sample closed form");

    // Decay-weighted sum with three unit layer losses: 0.64 + 0.8 + 1.0.
    // Identical rows give exactly ln 2 per layer; the weighting must scale it
    // by exactly 2.44.
    std::vector<TensorPtr> layers{f2, f2, f2};
    const double unit = std::log(2.0);
    const double feature = feature_loss(g, layers, layers, 0.8, 0.5).total->item();
    c.expect(std::fabs(feature / unit - 2.44) < 1e-12,
             "feature decay sum: got " + fmt(feature / unit) + ", want 2.44");

    // Weighted total: 1.0 + 0.1*2.0 + 0.01*3.0, same association as the code.
    const double total =
        total_loss(g, Tensor::scalar(1.0), Tensor::scalar(2.0), Tensor::scalar(3.0), 0.1, 0.01)
            ->item();
    c.expect(total == 1.0 + 0.1 * 2.0 + 0.01 * 3.0, "weighted total mismatch");
    c.finish();
}

void criterion_sinkhorn() {
    Criterion c("sinkhorn-correctness");
    Rng rng(2024);

    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_u64() % 3);
        const std::int64_t m = 2 + static_cast<std::int64_t>(rng.next_u64() % 3);
        std::vector<double> w(static_cast<std::size_t>(n * m));
        for (auto& v : w) v = std::fabs(rng.gaussian(0.0, 1.0));
        std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(m));
        double as = 0.0, bs = 0.0;
        for (auto& v : a) as += (v = 0.2 + rng.uniform());
        for (auto& v : b) bs += (v = 0.2 + rng.uniform());
        for (auto& v : a) v /= as;
        for (auto& v : b) v /= bs;

        const double mu = 0.05;
        TransportPlan plan = sinkhorn(Tensor::from({n, m}, w), a, b, mu, 20000, 1e-8);
        c.expect(plan.converged, "instance " + std::to_string(trial) + " did not converge");

        double viol = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double rs = 0.0;
            for (std::int64_t j = 0; j < m; ++j) rs += plan.plan->at(i, j);
            viol = std::max(viol, std::fabs(rs - a[static_cast<std::size_t>(i)]));
        }
        for (std::int64_t j = 0; j < m; ++j) {
            double cs = 0.0;
            for (std::int64_t i = 0; i < n; ++i) cs += plan.plan->at(i, j);
            viol = std::max(viol, std::fabs(cs - b[static_cast<std::size_t>(j)]));
        }
        c.expect(viol < 1e-6, "marginal violation " + fmt(viol));

        const double lp = test::transport_lp_optimum(w, n, m, a, b);
        c.expect(plan.cost >= lp - 1e-9, "entropic cost below LP optimum");
        c.expect(plan.cost <= lp + mu * std::log(static_cast<double>(n * m)) + 1e-9,
                 "entropic cost " + fmt(plan.cost) + " above LP+mu*ln(nm) bound, LP=" + fmt(lp));
    }

    // Zero cost: outer-product plan within 1e-10.
    const std::vector<double> a = {0.3, 0.7};
    const std::vector<double> b = {0.25, 0.5, 0.25};
    TransportPlan plan = sinkhorn(Tensor::zeros({2, 3}), a, b, 0.1, 100, 1e-12);
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 3; ++j)
            c.expect(std::fabs(plan.plan->at(i, j) -
                               a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)]) <
                         1e-10,
                     "zero-cost plan is not the outer product");

    c.expect(c.seconds() < 10.0, "runtime over 10 s");
    c.finish();
}

void criterion_qr_subspace() {
    Criterion c("qr-subspace");
    Rng rng(777);
    int agree = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_u64() % 63);
        const std::int64_t m = 2 + static_cast<std::int64_t>(rng.next_u64() % 63);
        std::vector<double> vocab(static_cast<std::size_t>(n * m));
        if (trial % 2 == 0) {
            // Rank-deficient construction: product of thin Gaussian factors.
            const std::int64_t r =
                1 + static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(std::min(n, m)));
            std::vector<double> left(static_cast<std::size_t>(n * r)), right(static_cast<std::size_t>(r * m));
            for (auto& v : left) v = rng.gaussian(0.0, 1.0);
            for (auto& v : right) v = rng.gaussian(0.0, 1.0);
            std::fill(vocab.begin(), vocab.end(), 0.0);
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t k = 0; k < r; ++k)
                    for (std::int64_t j = 0; j < m; ++j)
                        vocab[static_cast<std::size_t>(i * m + j)] +=
                            left[static_cast<std::size_t>(i * r + k)] *
                            right[static_cast<std::size_t>(k * m + j)];
        } else {
            for (auto& v : vocab) v = rng.gaussian(0.0, 1.0);
        }

        PrincipalEmbedding pe = qr_reduce(vocab, n, m, QrReduceOptions{});
        const std::int64_t d = pe.dhat->rows(), width = pe.dhat->cols();
        double dev = 0.0;
        for (std::int64_t i = 0; i < d; ++i)
            for (std::int64_t j = 0; j < d; ++j) {
                double dot = 0.0;
                for (std::int64_t k = 0; k < width; ++k) dot += pe.dhat->at(i, k) * pe.dhat->at(j, k);
                dev = std::max(dev, std::fabs(dot - (i == j ? 1.0 : 0.0)));
            }
        c.expect(dev < 1e-10, "orthonormality deviation " + fmt(dev));
        if (pe.numerical_rank == test::svd_rank(vocab, n, m, 1e-10)) ++agree;
    }
    c.expect(agree == 50, "rank oracle agreement " + std::to_string(agree) + "/50");
    c.finish("rank_agreement=50/50");
}

void criterion_frozen_teacher() {
    Criterion c("frozen-teacher");
    RunConfig cfg = tiny_grad_config();
    cfg.synth_t = 120;
    cfg.epochs = 13;  // 13 epochs x 8 steps = 104 optimizer steps

    PreparedData data = prepare_data(cfg);
    auto model = build_model(cfg);
    AdamOptimizer adam(cfg.lr);

    std::vector<std::vector<double>> frozen_before;
    for (const auto& p : model->frozen_parameters()) frozen_before.push_back(p.tensor->data);

    std::vector<std::int64_t> order(static_cast<std::size_t>(data.train_windows.count()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
    int steps = 0;
    for (std::int64_t epoch = 0; epoch < cfg.epochs && steps < 100; ++epoch) {
        for (std::int64_t begin = 0; begin < data.train_windows.count() && steps < 100;
             begin += cfg.batch) {
            const std::int64_t end = std::min(begin + cfg.batch, data.train_windows.count());
            Batch batch;
            batch.n_variates = data.train_windows.P;
            for (std::int64_t i = begin; i < end; ++i) {
                batch.inputs.push_back(data.train_windows.input(order[static_cast<std::size_t>(i)]));
                batch.targets.push_back(data.train_windows.target(order[static_cast<std::size_t>(i)]));
            }
            train_step(*model, batch, adam);
            ++steps;
        }
    }
    c.expect(steps == 100, "expected 100 steps, ran " + std::to_string(steps));

    std::size_t idx = 0;
    for (const auto& p : model->frozen_parameters()) {
        c.expect(p.tensor->data == frozen_before[idx], "frozen parameter changed: " + p.name);
        ++idx;
    }

    // Re-randomizing teacher-only parameters must leave the forecast command's
    // output bitwise identical.
    const std::string dir = "/tmp/tstcd_acc_frozen";
    TrainResult tr = run_train(cfg, dir);
    SeriesTable input = synth_generate(cfg.synth_seed, cfg.lookback + 4, cfg.synth_p, cfg.synth_spec());
    save_csv(input, dir + "/input.csv");
    run_forecast(tr.checkpoint_path, dir + "/input.csv", 0, dir + "/fc_a.csv");

    LoadedModel lm = load_model_checkpoint(tr.checkpoint_path);
    Rng rng(31337);
    for (auto& p : lm.model->parameters()) {
        if (p.name.rfind("head.teacher.", 0) == 0 || p.name.rfind("dag.", 0) == 0) {
            for (auto& v : p.tensor->data) v = rng.gaussian(0.0, 1.0);
        }
    }
    save_model_checkpoint(*lm.model, lm.stats, lm.normalized, dir + "/perturbed.tstcd");
    run_forecast(dir + "/perturbed.tstcd", dir + "/input.csv", 0, dir + "/fc_b.csv");
    c.expect(slurp(dir + "/fc_a.csv") == slurp(dir + "/fc_b.csv"),
             "forecast changed after re-randomizing teacher-only parameters");
    c.finish();
}

void criterion_end_to_end() {
    Criterion c("end-to-end-learning");
    const RunConfig cfg = pinned_benchmark();
    const std::string dir = "/tmp/tstcd_acc_e2e";
    TrainResult tr = run_train(cfg, dir);

    c.expect(tr.trace.size() == static_cast<std::size_t>(cfg.epochs), "trace length mismatch");
    const double first = tr.trace.front().total;
    const double last = tr.trace.back().total;
    c.expect(last <= 0.5 * first,
             "final total " + fmt(last) + " not below half of epoch-1 total " + fmt(first));

    const MetricsReport report = run_eval(tr.checkpoint_path, cfg);

    // Persistence baseline on the same raw test windows: repeat the last
    // observed row across the horizon.
    SeriesTable raw = synth_generate(cfg.synth_seed, cfg.synth_t, cfg.synth_p, cfg.synth_spec());
    SeriesSplits splits = chrono_split(raw, SplitRatios{cfg.split_train, cfg.split_val, cfg.split_test});
    WindowSet test_raw = window_split(splits.test, cfg.lookback, cfg.horizon, cfg.stride);
    double pers_se = 0.0;
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < test_raw.count(); ++i) {
        const double* last_row = test_raw.input(i) + (cfg.lookback - 1) * test_raw.P;
        for (std::int64_t h = 0; h < cfg.horizon; ++h)
            for (std::int64_t p = 0; p < test_raw.P; ++p) {
                const double e = last_row[p] - test_raw.target(i)[h * test_raw.P + p];
                pers_se += e * e;
                ++count;
            }
    }
    const double pers_mse = pers_se / static_cast<double>(count);
    c.expect(report.mse <= 0.5 * pers_mse, "test MSE " + fmt(report.mse) +
                                               " above half the persistence MSE " + fmt(pers_mse));
    c.expect(c.seconds() < 600.0, "runtime over 10 minutes");
    c.finish("mse=" + fmt(report.mse) + " persistence=" + fmt(pers_mse) + " loss_ratio=" +
             fmt(last / first));
}

void criterion_ablation() {
    Criterion c("ablation-structure");
    const RunConfig cfg = pinned_benchmark();
    const std::vector<AblationRow> rows = run_ablate(cfg, "/tmp/tstcd_acc_ablate");

    c.expect(rows.size() == 4, "expected 4 rows, got " + std::to_string(rows.size()));
    if (rows.size() == 4) {
        c.expect(rows[0].name == "dag_only" && rows[0].dag && !rows[0].feature && !rows[0].ot,
                 "row 1 toggle layout");
        c.expect(rows[1].name == "feature_only" && !rows[1].dag && rows[1].feature && !rows[1].ot,
                 "row 2 toggle layout");
        c.expect(rows[2].name == "ot_only" && !rows[2].dag && !rows[2].feature && rows[2].ot,
                 "row 3 toggle layout");
        c.expect(rows[3].name == "full" && rows[3].dag && rows[3].feature && rows[3].ot,
                 "row 4 toggle layout");

        const double full = rows[3].metrics.smape;
        std::string summary = "full=" + fmt(full);
        for (int i = 0; i < 3; ++i) {
            summary += " " + rows[static_cast<std::size_t>(i)].name + "=" +
                       fmt(rows[static_cast<std::size_t>(i)].metrics.smape);
            c.expect(full <= rows[static_cast<std::size_t>(i)].metrics.smape,
                     "full SMAPE " + fmt(full) + " above " + rows[static_cast<std::size_t>(i)].name +
                         " " + fmt(rows[static_cast<std::size_t>(i)].metrics.smape));
        }
        c.finish(summary);
        return;
    }
    c.finish();
}

void criterion_determinism() {
    Criterion c("determinism-persistence");
    RunConfig cfg = tiny_grad_config();
    cfg.synth_t = 120;
    cfg.epochs = 4;

    TrainResult a = run_train(cfg, "/tmp/tstcd_acc_det_a");
    TrainResult b = run_train(cfg, "/tmp/tstcd_acc_det_b");
    c.expect(slurp(a.trace_path) == slurp(b.trace_path), "same-seed traces differ");
    c.expect(slurp(a.checkpoint_path) == slurp(b.checkpoint_path), "same-seed checkpoints differ");

    // Round trip: load and re-save bitwise.
    LoadedModel lm = load_model_checkpoint(a.checkpoint_path);
    save_model_checkpoint(*lm.model, lm.stats, lm.normalized, "/tmp/tstcd_acc_det_a/resaved.tstcd");
    c.expect(slurp(a.checkpoint_path) == slurp("/tmp/tstcd_acc_det_a/resaved.tstcd"),
             "checkpoint round trip not bitwise");

    // Truncation fails loudly.
    const std::string whole = slurp(a.checkpoint_path);
    {
        std::ofstream out("/tmp/tstcd_acc_det_a/truncated.tstcd", std::ios::binary);
        out.write(whole.data(), static_cast<std::streamsize>(whole.size() / 2));
    }
    bool threw = false;
    std::string message;
    try {
        load_model_checkpoint("/tmp/tstcd_acc_det_a/truncated.tstcd");
    } catch (const ParseError& e) {
        threw = true;
        message = e.what();
    }
    c.expect(threw, "truncated checkpoint loaded without error");
    c.expect(message.find("offset") != std::string::npos, "truncation error lacks an offset");
    c.finish();
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_gradient_fidelity();
    criterion_loss_closed_forms();
    criterion_sinkhorn();
    criterion_qr_subspace();
    criterion_frozen_teacher();
    criterion_end_to_end();
    criterion_ablation();
    criterion_determinism();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria failed\n", g_failures);
    }
    return g_failures;
}
