// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "deepbroadcast/config.hpp"
#include "deepbroadcast/data.hpp"
#include "deepbroadcast/net.hpp"

namespace deepbroadcast::eval {

/// One aggregated grid point. `metric` is "accuracy" or "psnr" for the
/// across-repeats mean (n = test images x repeats) and "accuracy_std" /
/// "psnr_std" for the across-repeats standard deviation (n = repeats).
struct MetricsRecord {
    std::string variant;
    int user = 0;
    std::string task_id;
    double snr_db = 0;
    std::string metric;
    double value = 0;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
};

struct SweepResult {
    std::string variant;
    std::vector<double> grid;
    std::vector<std::string> task_ids;  // one per user
    std::vector<MetricsRecord> records;

    /// Primary metric name for a user ("accuracy" or "psnr").
    const std::string& primary_metric(int user) const;
    const MetricsRecord* find(int user, double snr_db, const std::string& metric) const;
    double value_at(int user, double snr_db) const;
    /// Legend number: arithmetic mean of the primary metric over the grid.
    double average(int user) const;
};

struct EvalOptions {
    int repeats = 5;
    std::int64_t batch = 250;
    std::uint64_t seed = 1;
};

/// Sweep every user jointly: at each grid point all channels run at that SNR
/// (each with its configured kind), the test set is encoded once with
/// deterministic latents, and `repeats` independent noise realizations are
/// pushed through each receiver.
SweepResult sweep(nn::Model<float>& model, const config::ExperimentConfig& cfg,
                  const data::Dataset& ds, std::span<const double> grid,
                  const EvalOptions& opt);

/// Single-user views of `sweep` for classification / recovery tasks.
std::vector<MetricsRecord> evaluate_accuracy(nn::Model<float>& model,
                                             const config::ExperimentConfig& cfg,
                                             const data::Dataset& ds, int user,
                                             std::span<const double> grid,
                                             const EvalOptions& opt);
std::vector<MetricsRecord> evaluate_psnr(nn::Model<float>& model,
                                         const config::ExperimentConfig& cfg,
                                         const data::Dataset& ds, int user,
                                         std::span<const double> grid, const EvalOptions& opt);

/// Mean per-image PSNR on [0,1] pixels: -10*log10(MSE), zero-MSE images
/// capped at 100 dB.
double psnr_db(const Tensor<float>& pred, const Tensor<float>& target);
constexpr double kPsnrCapDb = 100.0;

/// Accuracy (or PSNR for recovery users) through an identity channel,
/// conditioning the encoder at `snr_db`; the reference point for the
/// noise-free sentinel checks.
double noiseless_metric(nn::Model<float>& model, const config::ExperimentConfig& cfg,
                        const data::Dataset& ds, int user, double snr_db,
                        std::int64_t batch = 250);

struct ComparisonTable {
    std::vector<std::string> variants;
    std::vector<double> grid;
    std::vector<std::string> task_ids;
    std::vector<std::vector<double>> averages;             // [variant][user]
    std::vector<std::vector<std::vector<double>>> values;  // [variant][user][grid index]

    double gap(int variant_a, int variant_b, int user, int grid_idx) const {
        return values[static_cast<std::size_t>(variant_a)][static_cast<std::size_t>(user)]
                     [static_cast<std::size_t>(grid_idx)] -
               values[static_cast<std::size_t>(variant_b)][static_cast<std::size_t>(user)]
                     [static_cast<std::size_t>(grid_idx)];
    }

    std::string render() const;
};

/// Per-task average table plus pairwise per-SNR gaps; inputs must share the
/// grid and task layout.
ComparisonTable compare_variants(const std::vector<SweepResult>& results);

/// One chart per task (all variants overlaid, legend carries the averages)
/// plus one CSV of every record. Returns the created file paths.
std::vector<std::string> emit_plots(const std::vector<SweepResult>& results,
                                    const std::string& out_dir);

void write_csv(const std::vector<SweepResult>& results, const std::string& path);
std::vector<SweepResult> read_csv(const std::string& path);

/// Polyline chart in SVG, one series per curve. Shared by emit_plots.
struct PlotSeries {
    std::string label;
    std::vector<double> y;
};
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& x, const std::vector<PlotSeries>& series);

}  // namespace deepbroadcast::eval
