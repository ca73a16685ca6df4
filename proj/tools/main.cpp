// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepbroadcast/chansim.hpp"
#include "deepbroadcast/checkpoint.hpp"
#include "deepbroadcast/config.hpp"
#include "deepbroadcast/data.hpp"
#include "deepbroadcast/eval.hpp"
#include "deepbroadcast/fetch.hpp"
#include "deepbroadcast/trainer.hpp"

namespace {

using namespace deepbroadcast;
namespace fs = std::filesystem;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

std::vector<double> parse_grid(const std::string& spec) {
    // "lo:hi:step" or comma list
    if (spec.find(':') != std::string::npos) {
        double lo, hi, step;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0)
            throw config_error("bad grid spec '" + spec + "', expected lo:hi:step");
        std::vector<double> g;
        for (double x = lo; x <= hi + 1e-9; x += step) g.push_back(x);
        return g;
    }
    std::vector<double> g;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) g.push_back(std::stod(item));
    if (g.empty()) throw config_error("empty grid spec");
    return g;
}

config::ExperimentConfig resolve_config(const std::string& preset, const std::string& config_file,
                                        const std::vector<std::string>& overrides,
                                        const std::string& variant, const std::string& data_dir,
                                        const std::string& out_dir) {
    config::ExperimentConfig cfg;
    if (!config_file.empty()) {
        cfg = config::load_file(config_file);
    } else {
        cfg = config::expand_preset(preset.empty() ? "custom" : preset);
    }
    if (!variant.empty()) config::apply_override(cfg, "variant", variant);
    if (!data_dir.empty()) config::apply_override(cfg, "data_dir", data_dir);
    if (!out_dir.empty()) config::apply_override(cfg, "out_dir", out_dir);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw config_error("--set expects key=value, got '" + kv + "'");
        config::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

struct LoadedModel {
    config::ExperimentConfig cfg;
    std::unique_ptr<nn::Model<float>> model;
};

LoadedModel load_model(std::string ckpt_path) {
    if (fs::is_directory(ckpt_path)) ckpt_path += "/checkpoint.dbc";
    auto c = ckpt::load(ckpt_path);
    LoadedModel lm;
    lm.cfg = config::parse(c.config_text);
    lm.model = std::make_unique<nn::Model<float>>(nn::variant_from_string(lm.cfg.variant),
                                                  lm.cfg.model, lm.cfg.train.seed);
    ckpt::restore_parameters(*lm.model, c);
    return lm;
}

int cmd_fetch(const std::string& url, const std::string& out) {
    const auto dir = fetch::fetch_cifar10(url, out);
    (void)data::load_cifar10(dir);  // validate what we just unpacked
    std::cout << "dataset ready at " << dir << "\n";
    return 0;
}

int cmd_train(const config::ExperimentConfig& cfg, const std::string& run_dir,
              const std::string& resume_ckpt, std::int64_t resume_epochs, bool had_config) {
    data::Dataset ds = data::load_cifar10(cfg.data_dir);
    train::RunResult result;
    if (!resume_ckpt.empty()) {
        if (had_config) {
            auto stored = config::parse(ckpt::load(resume_ckpt).config_text);
            const auto diffs = train::config_diff(stored, cfg);
            if (!diffs.empty()) {
                std::cerr << "refusing resume: config differs from checkpoint on:";
                for (const auto& k : diffs) std::cerr << " " << k;
                std::cerr << "\n";
                return 2;
            }
        }
        result = train::resume(resume_ckpt, ds, resume_epochs);
    } else {
        result = train::train(cfg, ds, run_dir);
    }
    std::cout << "run directory: " << result.run_dir << "\n";
    std::cout << "checkpoint:    " << result.checkpoint_path << "\n";
    if (!result.epochs.empty()) {
        const auto& last = result.epochs.back();
        std::cout << "final epoch " << last.epoch << ": loss " << last.loss << ", train metric";
        for (double m : last.train_metric) std::cout << " " << m;
        std::cout << "\n";
    }
    return 0;
}

int cmd_sweep(const std::string& ckpt_path, const std::string& grid_spec, int repeats,
              const std::string& data_dir, const std::string& out_dir, std::uint64_t seed) {
    auto lm = load_model(ckpt_path);
    if (!data_dir.empty()) lm.cfg.data_dir = data_dir;
    auto ds = data::load_cifar10(lm.cfg.data_dir);
    const auto grid = grid_spec.empty() ? lm.cfg.eval_grid : parse_grid(grid_spec);
    eval::EvalOptions opt;
    opt.repeats = repeats > 0 ? repeats : lm.cfg.eval_repeats;
    opt.seed = seed;
    auto result = eval::sweep(*lm.model, lm.cfg, ds, grid, opt);

    const std::string out =
        out_dir.empty() ? (fs::path(ckpt_path).parent_path() / "sweep").string() : out_dir;
    fs::create_directories(out);
    {
        std::ofstream rc(out + "/resolved.cfg");
        rc << config::serialize(lm.cfg);
    }
    auto files = eval::emit_plots({result}, out);
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
    for (int u = 0; u < lm.cfg.n_users(); ++u)
        std::cout << "user " << u << " (" << lm.cfg.users[static_cast<std::size_t>(u)].task.task_id
                  << "): grid average " << result.average(u) << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, double snr, int repeats, const std::string& data_dir,
             std::uint64_t seed) {
    auto lm = load_model(ckpt_path);
    if (!data_dir.empty()) lm.cfg.data_dir = data_dir;
    auto ds = data::load_cifar10(lm.cfg.data_dir);
    std::vector<double> grid{snr};
    eval::EvalOptions opt;
    opt.repeats = repeats > 0 ? repeats : lm.cfg.eval_repeats;
    opt.seed = seed;
    auto result = eval::sweep(*lm.model, lm.cfg, ds, grid, opt);
    for (int u = 0; u < lm.cfg.n_users(); ++u) {
        const auto& metric = result.primary_metric(u);
        const auto* mean = result.find(u, snr, metric);
        const auto* std_rec = result.find(u, snr, metric + "_std");
        std::cout << "user " << u << " ("
                  << lm.cfg.users[static_cast<std::size_t>(u)].task.task_id << ") " << metric
                  << " @ " << snr << " dB: " << mean->value << " (std " << std_rec->value
                  << ", n " << mean->n << ")\n";
    }
    return 0;
}

int cmd_compare(const std::vector<std::string>& csvs, const std::string& out) {
    std::vector<eval::SweepResult> results;
    for (const auto& path : csvs)
        for (auto& r : eval::read_csv(path)) results.push_back(std::move(r));
    auto table = eval::compare_variants(results);
    const std::string rendered = table.render();
    std::cout << rendered;
    if (!out.empty()) {
        std::ofstream f(out);
        f << rendered;
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_plot(const std::string& csv, const std::string& out) {
    auto results = eval::read_csv(csv);
    auto files = eval::emit_plots(results, out);
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// selftest: fast statistical and gradient diagnostics, printed one per line.
// ---------------------------------------------------------------------------

bool selftest_channel() {
    using namespace chansim;
    RngStream rng(1, 0, RngStream::kGain);
    for (auto kind : {ChannelKind::rayleigh, ChannelKind::rician}) {
        ChannelSpec spec;
        spec.kind = kind;
        spec.rician_a = 2.0;
        spec.snr_db = 10.0;
        auto real = sample_gain<double>(spec, 200000, rng);
        double acc = 0;
        for (const auto& h : real.gains) acc += std::norm(h);
        const double mean = acc / static_cast<double>(real.gains.size());
        if (mean < 0.99 || mean > 1.01) return false;
    }
    // empirical SNR at 10 dB
    RngStream srng(2, 0, RngStream::kGeneric);
    std::vector<double> z(100000);
    for (auto& x : z) x = srng.gaussian();
    power_normalize_inplace<double>(std::span<double>(z));
    RngStream nrng(3, 0, RngStream::kNoise);
    ChannelSpec awgn;
    awgn.snr_db = 10.0;
    auto rx = transmit<double>(z, awgn, nrng);
    double p = 0, n = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p += z[i] * z[i];
        const double d = rx.values[i] - z[i];
        n += d * d;
    }
    const double snr_db = 10.0 * std::log10(p / n);
    return std::abs(snr_db - 10.0) < 0.3;
}

bool selftest_kl() {
    RngStream prm(4, 0, RngStream::kGeneric);
    RngStream mc(5, 0, RngStream::kGeneric);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> mu(3), sigma(3);
        for (auto& m : mu) m = prm.gaussian();
        for (auto& s : sigma) s = std::exp(0.5 * prm.gaussian());
        double closed = 0;
        for (std::size_t k = 0; k < mu.size(); ++k)
            closed += (mu[k] * mu[k] + sigma[k] * sigma[k] - 1.0) * 0.5 - std::log(sigma[k]);
        double est = 0;
        constexpr int kSamples = 200000;
        for (int s = 0; s < kSamples; ++s) {
            double lp = 0, lq = 0;
            for (std::size_t k = 0; k < mu.size(); ++k) {
                const double zv = mu[k] + sigma[k] * mc.gaussian();
                const double d = (zv - mu[k]) / sigma[k];
                lp += -0.5 * d * d - std::log(sigma[k]);
                lq += -0.5 * zv * zv;
            }
            est += lp - lq;
        }
        est /= kSamples;
        if (std::abs(est - closed) / std::max(closed, 0.05) > 0.02) return false;
    }
    return true;
}

bool selftest_grad() {
    using namespace nn;
    RngStream rng(6, 0, RngStream::kGeneric);
    ParameterStore<double> store;
    auto x = store.add("x", parameter(Tensor<double>({2, 3, 3, 2})));
    for (auto& v : x->value.v) v = rng.gaussian();
    auto conv = Conv2d<double>::create(store, "conv", 2, 3, ConvGeom{3, 3, 1, 1, 1, 1}, rng);
    auto lnorm = LayerNorm<double>::create(store, "ln", 3);
    Tensor<double> pool({2, 3, 3, 3});
    for (auto& v : pool.v) v = rng.gaussian();

    auto build = [&]() {
        auto h = softmax_last(lnorm(relu(conv(x))));
        return l1_loss(mul(h, constant(pool)), Tensor<double>::full({2, 3, 3, 3}, 0.1));
    };
    store.zero_grads();
    auto loss = build();
    backward(loss);
    std::vector<Tensor<double>> analytic;
    for (auto& [name, p] : store.items())
        analytic.push_back(p->grad.numel() ? p->grad : Tensor<double>::zeros(p->value.shape));
    const double eps = 1e-5;
    for (std::size_t pi = 0; pi < store.items().size(); ++pi) {
        auto& p = store.items()[pi].second;
        for (std::int64_t i = 0; i < p->value.numel(); ++i) {
            const double saved = p->value.v[static_cast<std::size_t>(i)];
            p->value.v[static_cast<std::size_t>(i)] = saved + eps;
            const double lp = build()->value.v[0];
            p->value.v[static_cast<std::size_t>(i)] = saved - eps;
            const double lm = build()->value.v[0];
            p->value.v[static_cast<std::size_t>(i)] = saved;
            const double numeric = (lp - lm) / (2 * eps);
            const double a = analytic[pi].v[static_cast<std::size_t>(i)];
            if (std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}) > 1e-4)
                return false;
        }
    }
    return true;
}

int cmd_selftest() {
    int failures = 0;
    const auto report = [&](const char* name, bool ok) {
        std::cout << "selftest: " << name << (ok ? " PASS" : " FAIL") << "\n";
        if (!ok) ++failures;
    };
    report("channel statistics", selftest_channel());
    report("kl closed form vs monte carlo", selftest_kl());
    report("gradient check", selftest_grad());
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeepBroadcast: task-oriented broadcast semantic communication benchmark"};
    app.require_subcommand(1);

    // fetch-data
    auto* fetch_cmd = app.add_subcommand("fetch-data", "download the CIFAR-10 binary set");
    std::string fetch_url = fetch::kDefaultCifarUrl;
    std::string fetch_out = env_or("DEEPBROADCAST_DATA_ROOT", "data");
    fetch_cmd->add_option("--url", fetch_url, "archive url");
    fetch_cmd->add_option("--out", fetch_out, "destination root directory");

    // train
    auto* train_cmd = app.add_subcommand("train", "train one variant");
    std::string preset, config_file, variant, data_dir, out_dir, run_dir, resume_ckpt;
    std::vector<std::string> overrides;
    std::int64_t resume_epochs = -1;
    train_cmd->add_option("--preset", preset, "case1|case2|case3|case4|case5|custom");
    train_cmd->add_option("--config", config_file, "experiment config file");
    train_cmd->add_option("--set", overrides, "key=value override (repeatable)");
    train_cmd->add_option("--variant", variant, "model variant override");
    train_cmd->add_option("--data", data_dir, "dataset directory");
    train_cmd->add_option("--out", out_dir, "output root for run directories");
    train_cmd->add_option("--run-dir", run_dir, "exact run directory (skips hash naming)");
    train_cmd->add_option("--resume", resume_ckpt, "checkpoint to continue from");
    train_cmd->add_option("--epochs", resume_epochs, "new total epoch budget when resuming");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "metrics at a single SNR");
    std::string eval_ckpt, eval_data;
    double eval_snr = 7.0;
    int eval_repeats = 0;
    std::uint64_t eval_seed = 1;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--snr", eval_snr, "SNR in dB");
    eval_cmd->add_option("--repeats", eval_repeats, "noise repeats");
    eval_cmd->add_option("--data", eval_data, "dataset directory");
    eval_cmd->add_option("--seed", eval_seed, "evaluation seed");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "SNR sweep with charts and csv");
    std::string sweep_ckpt, sweep_grid, sweep_data, sweep_out;
    int sweep_repeats = 0;
    std::uint64_t sweep_seed = 1;
    sweep_cmd->add_option("--ckpt", sweep_ckpt, "checkpoint path")->required();
    sweep_cmd->add_option("--grid", sweep_grid, "lo:hi:step or comma list (default: config)");
    sweep_cmd->add_option("--repeats", sweep_repeats, "noise repeats");
    sweep_cmd->add_option("--data", sweep_data, "dataset directory");
    sweep_cmd->add_option("--out", sweep_out, "output directory");
    sweep_cmd->add_option("--seed", sweep_seed, "evaluation seed");

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "cross-variant tables from sweep csvs");
    std::vector<std::string> cmp_csvs;
    std::string cmp_out;
    cmp_cmd->add_option("--csv", cmp_csvs, "sweep csv (repeatable)")->required();
    cmp_cmd->add_option("--out", cmp_out, "write the rendered table here");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "re-render charts from a sweep csv");
    std::string plot_csv, plot_out = "plots";
    plot_cmd->add_option("--csv", plot_csv, "sweep csv")->required();
    plot_cmd->add_option("--out", plot_out, "output directory");

    // selftest
    app.add_subcommand("selftest", "fast property checks (channel stats, KL, gradients)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fetch_cmd->parsed()) return cmd_fetch(fetch_url, fetch_out);
        if (train_cmd->parsed()) {
            auto cfg = resolve_config(preset, config_file, overrides, variant,
                                      data_dir.empty() ? env_or("DEEPBROADCAST_DATA", "") : data_dir,
                                      out_dir);
            return cmd_train(cfg, run_dir, resume_ckpt, resume_epochs,
                             !preset.empty() || !config_file.empty());
        }
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_snr, eval_repeats,
                            eval_data.empty() ? env_or("DEEPBROADCAST_DATA", "") : eval_data,
                            eval_seed);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_ckpt, sweep_grid, sweep_repeats,
                             sweep_data.empty() ? env_or("DEEPBROADCAST_DATA", "") : sweep_data,
                             sweep_out, sweep_seed);
        if (cmp_cmd->parsed()) return cmd_compare(cmp_csvs, cmp_out);
        if (plot_cmd->parsed()) return cmd_plot(plot_csv, plot_out);
        return cmd_selftest();
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
