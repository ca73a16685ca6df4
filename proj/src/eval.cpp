// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include "deepbroadcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace deepbroadcast::eval {

namespace {

bool snr_close(double a, double b) { return a == b || std::abs(a - b) < 1e-9; }

std::vector<std::int64_t> test_indices(const data::Dataset& ds) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(ds.n_test()));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

double accuracy_of(const Tensor<float>& logits, const std::vector<int>& labels) {
    const std::int64_t B = logits.rows();
    const std::int64_t K = logits.last();
    std::int64_t correct = 0;
    for (std::int64_t b = 0; b < B; ++b) {
        const float* row = logits.data() + b * K;
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < K; ++j)
            if (row[j] > row[best]) best = j;
        if (static_cast<int>(best) == labels[static_cast<std::size_t>(b)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(B);
}

}  // namespace

double psnr_db(const Tensor<float>& pred, const Tensor<float>& target) {
    require_same_shape(pred, target, "psnr");
    if (pred.rank() != 4) throw shape_error("psnr expects an image batch (B,H,W,C)");
    const std::int64_t B = pred.dim(0);
    const std::int64_t per = pred.numel() / B;
    double acc = 0;
    for (std::int64_t b = 0; b < B; ++b) {
        double mse = 0;
        const float* p = pred.data() + b * per;
        const float* t = target.data() + b * per;
        for (std::int64_t i = 0; i < per; ++i) {
            const double d = static_cast<double>(p[i]) - t[i];
            mse += d * d;
        }
        mse /= static_cast<double>(per);
        acc += mse == 0.0 ? kPsnrCapDb : std::min(kPsnrCapDb, -10.0 * std::log10(mse));
    }
    return acc / static_cast<double>(B);
}

const std::string& SweepResult::primary_metric(int user) const {
    static const std::string kAcc = "accuracy", kPsnr = "psnr";
    for (const auto& r : records)
        if (r.user == user) return r.metric == "psnr" || r.metric == "psnr_std" ? kPsnr : kAcc;
    throw config_error("sweep holds no records for user " + std::to_string(user));
}

const MetricsRecord* SweepResult::find(int user, double snr_db, const std::string& metric) const {
    for (const auto& r : records)
        if (r.user == user && r.metric == metric && snr_close(r.snr_db, snr_db)) return &r;
    return nullptr;
}

double SweepResult::value_at(int user, double snr_db) const {
    const auto* r = find(user, snr_db, primary_metric(user));
    if (!r)
        throw config_error("no record for user " + std::to_string(user) + " at " +
                           std::to_string(snr_db) + " dB");
    return r->value;
}

double SweepResult::average(int user) const {
    const auto& metric = primary_metric(user);
    double acc = 0;
    std::int64_t n = 0;
    for (const double s : grid) {
        const auto* r = find(user, s, metric);
        if (!r) throw config_error("sweep grid incomplete for user " + std::to_string(user));
        acc += r->value;
        ++n;
    }
    return acc / static_cast<double>(n);
}

SweepResult sweep(nn::Model<float>& model, const config::ExperimentConfig& cfg,
                  const data::Dataset& ds, std::span<const double> grid, const EvalOptions& opt) {
    if (grid.empty()) throw config_error("sweep: empty SNR grid");
    if (opt.repeats < 1) throw config_error("sweep: repeats must be >= 1");
    if (ds.n_test() < 1) throw data_error("sweep: empty test set");

    const int n_users = cfg.n_users();
    SweepResult result;
    result.variant = nn::to_string(model.variant());
    result.grid.assign(grid.begin(), grid.end());
    for (const auto& u : cfg.users) result.task_ids.push_back(u.task.task_id);

    const auto indices = test_indices(ds);
    const std::int64_t n_test = ds.n_test();

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double snr = grid[gi];
        std::vector<double> snrs(static_cast<std::size_t>(n_users), snr);

        // metric accumulator per (user, repeat)
        std::vector<std::vector<double>> acc(static_cast<std::size_t>(n_users),
                                             std::vector<double>(static_cast<std::size_t>(opt.repeats), 0.0));
        // one noise stream per (user, repeat), advanced across batches
        std::vector<std::vector<RngStream>> rngs;
        for (int u = 0; u < n_users; ++u) {
            std::vector<RngStream> per_rep;
            for (int r = 0; r < opt.repeats; ++r)
                per_rep.push_back(RngStream(opt.seed, static_cast<std::uint64_t>(u),
                                            RngStream::kEval)
                                      .fork(gi * 1024 + static_cast<std::uint64_t>(r)));
            rngs.push_back(std::move(per_rep));
        }

        for (std::int64_t start = 0; start < n_test; start += opt.batch) {
            const std::int64_t bsz = std::min<std::int64_t>(opt.batch, n_test - start);
            std::span<const std::int64_t> idx(indices.data() + start,
                                              static_cast<std::size_t>(bsz));
            const auto images = ds.gather_images(idx, /*from_test=*/true);
            const auto labels10 = ds.gather_labels(idx, /*from_test=*/true);

            // deterministic latents: encode once, replay noise per repeat
            auto enc = model.encode(images, snrs, nullptr);

            for (int u = 0; u < n_users; ++u) {
                const auto ui = static_cast<std::size_t>(u);
                auto spec = cfg.users[ui].channel;
                spec.snr_db = snr;
                const auto& task = cfg.users[ui].task;
                const auto task_labels = data::map_task_labels(labels10, task);
                for (int r = 0; r < opt.repeats; ++r) {
                    auto real = chansim::sample_batch<float>(spec, bsz, model.tx_symbols(u),
                                                             rngs[ui][static_cast<std::size_t>(r)]);
                    auto received = real.apply(enc.tx[ui]->value);
                    auto out = model.decode(u, nn::constant(std::move(received)));
                    const double weight = static_cast<double>(bsz) / static_cast<double>(n_test);
                    if (task.kind == data::TaskSpec::Kind::recover) {
                        acc[ui][static_cast<std::size_t>(r)] +=
                            weight * psnr_db(out->value, images);
                    } else {
                        acc[ui][static_cast<std::size_t>(r)] +=
                            weight * accuracy_of(out->value, task_labels);
                    }
                }
            }
        }

        for (int u = 0; u < n_users; ++u) {
            const auto ui = static_cast<std::size_t>(u);
            const bool recover = cfg.users[ui].task.kind == data::TaskSpec::Kind::recover;
            double mean = 0;
            for (const double a : acc[ui]) mean += a;
            mean /= static_cast<double>(opt.repeats);
            double var = 0;
            for (const double a : acc[ui]) var += (a - mean) * (a - mean);
            const double std_dev =
                opt.repeats > 1 ? std::sqrt(var / static_cast<double>(opt.repeats - 1)) : 0.0;

            MetricsRecord rec;
            rec.variant = result.variant;
            rec.user = u;
            rec.task_id = cfg.users[ui].task.task_id;
            rec.snr_db = snr;
            rec.metric = recover ? "psnr" : "accuracy";
            rec.value = mean;
            rec.n = n_test * opt.repeats;
            rec.seed = opt.seed;
            result.records.push_back(rec);

            rec.metric += "_std";
            rec.value = std_dev;
            rec.n = opt.repeats;
            result.records.push_back(rec);
        }
    }
    return result;
}

namespace {

std::vector<MetricsRecord> filter_user(const SweepResult& full, int user) {
    std::vector<MetricsRecord> out;
    for (const auto& r : full.records)
        if (r.user == user) out.push_back(r);
    return out;
}

}  // namespace

std::vector<MetricsRecord> evaluate_accuracy(nn::Model<float>& model,
                                             const config::ExperimentConfig& cfg,
                                             const data::Dataset& ds, int user,
                                             std::span<const double> grid,
                                             const EvalOptions& opt) {
    if (user < 0 || user >= cfg.n_users()) throw config_error("unknown user index");
    if (cfg.users[static_cast<std::size_t>(user)].task.kind != data::TaskSpec::Kind::classify)
        throw config_error("evaluate_accuracy: user " + std::to_string(user) +
                           " is not a classification task");
    return filter_user(sweep(model, cfg, ds, grid, opt), user);
}

std::vector<MetricsRecord> evaluate_psnr(nn::Model<float>& model,
                                         const config::ExperimentConfig& cfg,
                                         const data::Dataset& ds, int user,
                                         std::span<const double> grid, const EvalOptions& opt) {
    if (user < 0 || user >= cfg.n_users()) throw config_error("unknown user index");
    if (cfg.users[static_cast<std::size_t>(user)].task.kind != data::TaskSpec::Kind::recover)
        throw config_error("evaluate_psnr: user " + std::to_string(user) +
                           " is not a recovery task");
    return filter_user(sweep(model, cfg, ds, grid, opt), user);
}

double noiseless_metric(nn::Model<float>& model, const config::ExperimentConfig& cfg,
                        const data::Dataset& ds, int user, double snr_db, std::int64_t batch) {
    const auto indices = test_indices(ds);
    const std::int64_t n_test = ds.n_test();
    std::vector<double> snrs(static_cast<std::size_t>(cfg.n_users()), snr_db);
    const auto& task = cfg.users[static_cast<std::size_t>(user)].task;
    double acc = 0;
    for (std::int64_t start = 0; start < n_test; start += batch) {
        const std::int64_t bsz = std::min<std::int64_t>(batch, n_test - start);
        std::span<const std::int64_t> idx(indices.data() + start, static_cast<std::size_t>(bsz));
        const auto images = ds.gather_images(idx, true);
        const auto labels10 = ds.gather_labels(idx, true);
        auto enc = model.encode(images, snrs, nullptr);
        auto out = model.decode(user, enc.tx[static_cast<std::size_t>(user)]);
        const double weight = static_cast<double>(bsz) / static_cast<double>(n_test);
        if (task.kind == data::TaskSpec::Kind::recover) {
            acc += weight * psnr_db(out->value, images);
        } else {
            acc += weight * accuracy_of(out->value, data::map_task_labels(labels10, task));
        }
    }
    return acc;
}

ComparisonTable compare_variants(const std::vector<SweepResult>& results) {
    if (results.empty()) throw config_error("compare: no sweep results");
    ComparisonTable t;
    t.grid = results[0].grid;
    t.task_ids = results[0].task_ids;
    for (const auto& r : results) {
        if (r.grid != t.grid) throw config_error("compare: SNR grids differ between sweeps");
        if (r.task_ids != t.task_ids) throw config_error("compare: task sets differ");
        t.variants.push_back(r.variant);
        std::vector<double> avg;
        std::vector<std::vector<double>> vals;
        for (int u = 0; u < static_cast<int>(r.task_ids.size()); ++u) {
            avg.push_back(r.average(u));
            std::vector<double> curve;
            for (const double s : t.grid) curve.push_back(r.value_at(u, s));
            vals.push_back(std::move(curve));
        }
        t.averages.push_back(std::move(avg));
        t.values.push_back(std::move(vals));
    }
    return t;
}

std::string ComparisonTable::render() const {
    std::ostringstream os;
    os << "grid-averaged metric per task\n";
    os << "  variant";
    for (const auto& id : task_ids) os << "  " << id;
    os << "\n";
    for (std::size_t v = 0; v < variants.size(); ++v) {
        os << "  " << variants[v];
        for (std::size_t u = 0; u < task_ids.size(); ++u) {
            os.precision(4);
            os << "  " << std::fixed << averages[v][u];
            os.unsetf(std::ios::fixed);
        }
        os << "\n";
    }
    for (std::size_t a = 0; a < variants.size(); ++a) {
        for (std::size_t b = a + 1; b < variants.size(); ++b) {
            os << "gaps " << variants[a] << " - " << variants[b] << "\n";
            for (std::size_t u = 0; u < task_ids.size(); ++u) {
                os << "  " << task_ids[u] << ":";
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    os.precision(3);
                    os << " " << std::fixed
                       << gap(static_cast<int>(a), static_cast<int>(b), static_cast<int>(u),
                              static_cast<int>(g));
                    os.unsetf(std::ios::fixed);
                }
                os << "\n";
            }
        }
    }
    return os.str();
}

void write_csv(const std::vector<SweepResult>& results, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write csv: " + path);
    out << "variant,user,task,snr_db,metric,value,n,seed\n";
    out.precision(10);
    for (const auto& r : results)
        for (const auto& rec : r.records)
            out << rec.variant << ',' << rec.user << ',' << rec.task_id << ',' << rec.snr_db
                << ',' << rec.metric << ',' << rec.value << ',' << rec.n << ',' << rec.seed
                << "\n";
    if (!out) throw std::runtime_error("short write for csv: " + path);
}

std::vector<SweepResult> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open csv: " + path);
    std::string header;
    if (!std::getline(in, header) || header != "variant,user,task,snr_db,metric,value,n,seed")
        throw data_error("unexpected csv header in " + path);

    std::vector<SweepResult> results;
    auto result_of = [&](const std::string& variant) -> SweepResult& {
        for (auto& r : results)
            if (r.variant == variant) return r;
        results.emplace_back();
        results.back().variant = variant;
        return results.back();
    };

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        MetricsRecord rec;
        std::getline(ss, rec.variant, ',');
        std::getline(ss, field, ',');
        rec.user = std::stoi(field);
        std::getline(ss, rec.task_id, ',');
        std::getline(ss, field, ',');
        rec.snr_db = std::stod(field);
        std::getline(ss, rec.metric, ',');
        std::getline(ss, field, ',');
        rec.value = std::stod(field);
        std::getline(ss, field, ',');
        rec.n = std::stoll(field);
        std::getline(ss, field, ',');
        rec.seed = std::stoull(field);

        auto& r = result_of(rec.variant);
        if (std::none_of(r.grid.begin(), r.grid.end(),
                         [&](double s) { return snr_close(s, rec.snr_db); }))
            r.grid.push_back(rec.snr_db);
        while (static_cast<int>(r.task_ids.size()) <= rec.user) r.task_ids.emplace_back();
        r.task_ids[static_cast<std::size_t>(rec.user)] = rec.task_id;
        r.records.push_back(std::move(rec));
    }
    for (auto& r : results) std::sort(r.grid.begin(), r.grid.end());
    return results;
}

std::vector<std::string> emit_plots(const std::vector<SweepResult>& results,
                                    const std::string& out_dir) {
    if (results.empty()) throw config_error("emit_plots: no sweep results");
    for (const auto& r : results)
        if (r.records.empty()) throw config_error("emit_plots: empty sweep result");
    const auto table = compare_variants(results);  // validates grid/task alignment

    std::filesystem::create_directories(out_dir);
    std::vector<std::string> files;
    for (std::size_t u = 0; u < table.task_ids.size(); ++u) {
        const auto& metric = results[0].primary_metric(static_cast<int>(u));
        std::vector<PlotSeries> series;
        for (std::size_t v = 0; v < results.size(); ++v) {
            PlotSeries s;
            std::ostringstream label;
            label.precision(metric == "psnr" ? 4 : 4);
            label << results[v].variant << " (avg " << std::fixed << table.averages[v][u]
                  << (metric == "psnr" ? " dB)" : ")");
            s.label = label.str();
            s.y = table.values[v][u];
            series.push_back(std::move(s));
        }
        const std::string path = out_dir + "/" + metric + "_" + table.task_ids[u] + ".svg";
        write_svg_chart(path, table.task_ids[u] + " vs SNR", "SNR (dB)",
                        metric == "psnr" ? "PSNR (dB)" : "accuracy", table.grid, series);
        files.push_back(path);
    }
    const std::string csv = out_dir + "/sweep.csv";
    write_csv(results, csv);
    files.push_back(csv);
    return files;
}

}  // namespace deepbroadcast::eval
