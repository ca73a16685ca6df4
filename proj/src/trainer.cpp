// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include "deepbroadcast/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "deepbroadcast/objective.hpp"

namespace deepbroadcast::train {

namespace fs = std::filesystem;

std::string EpochRecord::to_json() const {
    nlohmann::json j;
    j["epoch"] = epoch;
    j["loss"] = loss;
    j["task_loss"] = task_losses;
    j["kl"] = kls;
    j["train_metric"] = train_metric;
    j["wall_seconds"] = wall_seconds;
    return j.dump();
}

EpochRecord EpochRecord::from_json(const std::string& line) {
    EpochRecord r;
    const auto j = nlohmann::json::parse(line);
    r.epoch = j.at("epoch").get<std::int64_t>();
    r.loss = j.at("loss").get<double>();
    r.task_losses = j.at("task_loss").get<std::vector<double>>();
    r.kls = j.at("kl").get<std::vector<double>>();
    r.train_metric = j.at("train_metric").get<std::vector<double>>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
}

bool EpochRecord::same_numbers(const EpochRecord& o) const {
    return epoch == o.epoch && loss == o.loss && task_losses == o.task_losses && kls == o.kls &&
           train_metric == o.train_metric;
}

double sample_snr(const std::vector<double>& snr_list, bool continuous, RngStream& rng) {
    if (snr_list.empty()) throw config_error("empty SNR list");
    if (!continuous)
        return snr_list[static_cast<std::size_t>(rng.uniform_int(snr_list.size()))];
    const auto [lo, hi] = std::minmax_element(snr_list.begin(), snr_list.end());
    return *lo + (*hi - *lo) * rng.uniform();
}

namespace {

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

struct StepOutcome {
    double loss = 0;
    std::vector<double> task_losses, kls;
};

/// One optimization step over a mini-batch; returns the loss pieces and
/// accumulates training metrics (correct counts / L1 sums).
StepOutcome run_step(nn::Model<float>& model, const config::ExperimentConfig& cfg,
                     const data::BatchStream::Batch& batch, const std::vector<double>& snrs,
                     std::vector<RngStream>& chan_rngs, std::vector<RngStream>& latent_rngs,
                     Adam<float>& opt, double lr, std::vector<double>& metric_acc,
                     std::vector<std::int64_t>& metric_n) {
    const std::int64_t B = batch.images.dim(0);
    const int n_users = cfg.n_users();
    const bool stochastic = cfg.train.stochastic && model.variational();

    std::vector<Tensor<float>> lambdas;
    if (stochastic) {
        for (int u = 0; u < n_users; ++u) {
            Tensor<float> lam({B, model.config().c2()});
            auto& rng = latent_rngs[static_cast<std::size_t>(u)];
            for (auto& x : lam.v) x = static_cast<float>(rng.gaussian());
            lambdas.push_back(std::move(lam));
        }
    }

    const auto snr_diag = [&snrs] {
        std::ostringstream os;
        os << "snrs=[";
        for (std::size_t i = 0; i < snrs.size(); ++i) os << (i ? "," : "") << snrs[i];
        os << "]";
        return os.str();
    };

    nn::Var<float> total;
    nn::LossBreakdown bd;
    try {
        auto enc = model.encode(batch.images, snrs, stochastic ? &lambdas : nullptr);

        std::vector<nn::Var<float>> task_losses;
        std::vector<nn::Var<float>> kls;
        for (int u = 0; u < n_users; ++u) {
            const auto ui = static_cast<std::size_t>(u);
            auto spec = cfg.users[ui].channel;
            spec.snr_db = snrs[ui];
            const std::shared_ptr<const chansim::BatchRealization<float>> real =
                std::make_shared<chansim::BatchRealization<float>>(
                    chansim::sample_batch<float>(spec, B, model.tx_symbols(u), chan_rngs[ui]));
            auto received = nn::apply_channel(enc.tx[ui], real);
            auto out = model.decode(u, received);

            if (cfg.users[ui].task.kind == data::TaskSpec::Kind::recover) {
                task_losses.push_back(nn::l1_loss(out, batch.images));
                metric_acc[ui] += static_cast<double>(task_losses.back()->value.v[0]) *
                                  static_cast<double>(B);
                metric_n[ui] += B;
            } else {
                const auto& labels = batch.task_labels[ui];
                task_losses.push_back(nn::cross_entropy(out, labels));
                const std::int64_t k = out->value.last();
                for (std::int64_t b = 0; b < B; ++b) {
                    const float* row = out->value.data() + b * k;
                    std::int64_t best = 0;
                    for (std::int64_t j = 1; j < k; ++j)
                        if (row[j] > row[best]) best = j;
                    if (static_cast<int>(best) == labels[static_cast<std::size_t>(b)])
                        metric_acc[ui] += 1.0;
                }
                metric_n[ui] += B;
            }
            if (model.variational() && cfg.loss.beta > 0)
                kls.push_back(nn::gaussian_kl(enc.stats[ui].mu, enc.stats[ui].sigma));
        }
        total = nn::broadcast_ib_loss(task_losses, kls, cfg.loss, &bd);
    } catch (const std::exception& e) {
        throw std::runtime_error("training aborted: invalid forward pass (" +
                                 std::string(e.what()) + "); " + snr_diag());
    }

    if (!std::isfinite(bd.total)) {
        std::ostringstream os;
        os << "training aborted: non-finite loss; " << snr_diag() << " task_losses=[";
        for (std::size_t i = 0; i < bd.task_losses.size(); ++i)
            os << (i ? "," : "") << bd.task_losses[i];
        os << "] kls=[";
        for (std::size_t i = 0; i < bd.kls.size(); ++i) os << (i ? "," : "") << bd.kls[i];
        os << "]";
        throw std::runtime_error(os.str());
    }

    model.params().zero_grads();
    nn::backward(total);
    clip_gradients(model.params(), cfg.train.clip_norm);
    opt.step(model.params(), lr);

    StepOutcome out;
    out.loss = bd.total;
    out.task_losses = bd.task_losses;
    out.kls = bd.kls;
    if (out.kls.empty()) out.kls.assign(static_cast<std::size_t>(n_users), 0.0);
    return out;
}

ckpt::Checkpoint make_checkpoint(nn::Model<float>& model, Adam<float>& opt,
                                 const config::ExperimentConfig& cfg, std::int64_t epoch,
                                 const std::string& metrics_json) {
    ckpt::Checkpoint c;
    c.variant = nn::to_string(model.variant());
    c.epoch = epoch;
    c.adam_step = opt.step_count();
    c.config_text = config::serialize(cfg);
    c.metrics_json = metrics_json;
    const auto& items = model.params().items();
    for (const auto& [name, p] : items) c.arrays.emplace_back(name, p->value);
    for (std::size_t i = 0; i < items.size(); ++i)
        c.arrays.emplace_back("adam.m." + items[i].first, opt.slots_m()[i]);
    for (std::size_t i = 0; i < items.size(); ++i)
        c.arrays.emplace_back("adam.v." + items[i].first, opt.slots_v()[i]);
    return c;
}

RunResult train_loop(const config::ExperimentConfig& cfg, const data::Dataset& ds,
                     nn::Model<float>& model, Adam<float>& opt, std::int64_t start_epoch,
                     const std::string& run_dir) {
    fs::create_directories(run_dir);
    {
        std::ofstream rc(run_dir + "/resolved.cfg");
        rc << config::serialize(cfg);
    }
    std::ofstream metrics_out(run_dir + "/metrics.jsonl", std::ios::app);
    if (!metrics_out) throw std::runtime_error("cannot write metrics log in " + run_dir);

    std::vector<data::TaskSpec> tasks;
    for (const auto& u : cfg.users) tasks.push_back(u.task);
    const int n_users = cfg.n_users();
    const auto seed = cfg.train.seed;

    RunResult result;
    result.run_dir = run_dir;
    result.checkpoint_path = run_dir + "/checkpoint.dbc";

    for (std::int64_t epoch = start_epoch + 1; epoch <= cfg.train.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        data::BatchStream stream(ds, tasks, cfg.train.batch,
                                 RngStream(seed, 0, RngStream::kShuffle).fork(
                                     static_cast<std::uint64_t>(epoch)));
        std::vector<RngStream> snr_rngs, chan_rngs, latent_rngs;
        for (int u = 0; u < n_users; ++u) {
            const auto uu = static_cast<std::uint64_t>(u);
            const auto ue = static_cast<std::uint64_t>(epoch);
            snr_rngs.emplace_back(RngStream(seed, uu, RngStream::kSnrDraw).fork(ue));
            chan_rngs.emplace_back(RngStream(seed, uu, RngStream::kNoise).fork(ue));
            latent_rngs.emplace_back(RngStream(seed, uu, RngStream::kLatent).fork(ue));
        }

        const double lr =
            cfg.train.lr * std::pow(cfg.train.lr_decay, static_cast<double>(epoch - 1));
        double loss_sum = 0;
        std::vector<double> task_loss_sum(static_cast<std::size_t>(n_users), 0.0);
        std::vector<double> kl_sum(static_cast<std::size_t>(n_users), 0.0);
        std::vector<double> metric_acc(static_cast<std::size_t>(n_users), 0.0);
        std::vector<std::int64_t> metric_n(static_cast<std::size_t>(n_users), 0);
        std::int64_t batches = 0;

        data::BatchStream::Batch batch;
        while (stream.next(batch)) {
            std::vector<double> snrs;
            for (int u = 0; u < n_users; ++u)
                snrs.push_back(sample_snr(cfg.train.snr_list, cfg.train.continuous_snr,
                                          snr_rngs[static_cast<std::size_t>(u)]));
            auto outcome = run_step(model, cfg, batch, snrs, chan_rngs, latent_rngs, opt, lr,
                                    metric_acc, metric_n);
            loss_sum += outcome.loss;
            for (int u = 0; u < n_users; ++u) {
                task_loss_sum[static_cast<std::size_t>(u)] +=
                    outcome.task_losses[static_cast<std::size_t>(u)];
                kl_sum[static_cast<std::size_t>(u)] += outcome.kls[static_cast<std::size_t>(u)];
            }
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(batches);
        for (int u = 0; u < n_users; ++u) {
            const auto ui = static_cast<std::size_t>(u);
            rec.task_losses.push_back(task_loss_sum[ui] / static_cast<double>(batches));
            rec.kls.push_back(kl_sum[ui] / static_cast<double>(batches));
            rec.train_metric.push_back(metric_acc[ui] /
                                       static_cast<double>(std::max<std::int64_t>(1, metric_n[ui])));
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        metrics_out << rec.to_json() << "\n";
        metrics_out.flush();
        result.epochs.push_back(rec);

        if (epoch % cfg.train.save_every == 0 || epoch == cfg.train.epochs) {
            auto c = make_checkpoint(model, opt, cfg, epoch, rec.to_json());
            ckpt::save(c, result.checkpoint_path);
        }
    }
    return result;
}

}  // namespace

RunResult train(const config::ExperimentConfig& cfg_in, const data::Dataset& ds,
                const std::string& run_dir_override) {
    config::ExperimentConfig cfg = cfg_in;
    cfg.finalize();
    nn::Model<float> model(nn::variant_from_string(cfg.variant), cfg.model, cfg.train.seed);
    Adam<float> opt;
    opt.attach(model.params());
    const std::string run_dir =
        run_dir_override.empty()
            ? cfg.out_dir + "/" + cfg.preset + "-" + cfg.variant + "-" + config::config_hash(cfg) +
                  "-" + timestamp()
            : run_dir_override;
    return train_loop(cfg, ds, model, opt, 0, run_dir);
}

RunResult resume(const std::string& checkpoint_path, const data::Dataset& ds,
                 std::int64_t total_epochs) {
    auto c = ckpt::load(checkpoint_path);
    config::ExperimentConfig cfg = config::parse(c.config_text);
    if (total_epochs > 0) cfg.train.epochs = total_epochs;
    if (c.epoch >= cfg.train.epochs)
        throw config_error("checkpoint is already at epoch " + std::to_string(c.epoch) +
                           " of " + std::to_string(cfg.train.epochs));

    nn::Model<float> model(nn::variant_from_string(cfg.variant), cfg.model, cfg.train.seed);
    ckpt::restore_parameters(model, c);
    Adam<float> opt;
    opt.attach(model.params());
    opt.set_step_count(c.adam_step);
    const auto& items = model.params().items();
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto* m = c.find("adam.m." + items[i].first);
        const auto* v = c.find("adam.v." + items[i].first);
        if (!m || !v)
            throw checkpoint_error("checkpoint missing optimizer state for " + items[i].first);
        opt.slots_m()[i].v = m->v;
        opt.slots_v()[i].v = v->v;
    }
    const std::string run_dir = fs::path(checkpoint_path).parent_path().string();
    return train_loop(cfg, ds, model, opt, c.epoch, run_dir.empty() ? "." : run_dir);
}

std::vector<std::string> config_diff(const config::ExperimentConfig& a,
                                     const config::ExperimentConfig& b) {
    const auto parse_lines = [](const std::string& text) {
        std::map<std::string, std::string> kv;
        std::stringstream ss(text);
        std::string line;
        while (std::getline(ss, line)) {
            const auto eq = line.find('=');
            if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
            const auto key = line.substr(0, eq);
            kv[key.substr(0, key.find_last_not_of(' ') + 1)] = line.substr(eq + 1);
        }
        return kv;
    };
    const auto ka = parse_lines(config::serialize(a));
    const auto kb = parse_lines(config::serialize(b));
    std::vector<std::string> diffs;
    for (const auto& [k, v] : ka) {
        if (k == "train.epochs" || k == "out_dir" || k == "data_dir") continue;
        auto it = kb.find(k);
        if (it == kb.end() || it->second != v) diffs.push_back(k);
    }
    for (const auto& [k, v] : kb)
        if (!ka.count(k)) diffs.push_back(k);
    return diffs;
}

}  // namespace deepbroadcast::train
