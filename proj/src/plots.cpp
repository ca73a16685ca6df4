// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "deepbroadcast/eval.hpp"

namespace deepbroadcast::eval {

namespace {

constexpr int kWidth = 760, kHeight = 480;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

double nice_step(double span) {
    if (span <= 0) return 1.0;
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (const double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

}  // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& x, const std::vector<PlotSeries>& series) {
    if (x.empty() || series.empty()) throw config_error("chart needs at least one point");
    for (const auto& s : series)
        if (s.y.size() != x.size()) throw shape_error("chart series length mismatch");

    double ymin = series[0].y[0], ymax = ymin;
    for (const auto& s : series)
        for (const double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (ymax - ymin < 1e-9) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;
    const double xmin = x.front(), xmax = x.back();

    const double plot_w = kWidth - kMarginL - kMarginR;
    const double plot_h = kHeight - kMarginT - kMarginB;
    auto sx = [&](double v) { return kMarginL + (v - xmin) / (xmax - xmin) * plot_w; };
    auto sy = [&](double v) { return kMarginT + (ymax - v) / (ymax - ymin) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
        << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='16' "
        << "font-family='sans-serif'>" << title << "</text>\n";

    // axes
    svg << "<rect x='" << kMarginL << "' y='" << kMarginT << "' width='" << plot_w
        << "' height='" << plot_h << "' fill='none' stroke='black'/>\n";

    const double xstep = nice_step(xmax - xmin);
    for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-9; t += xstep) {
        svg << "<line x1='" << sx(t) << "' y1='" << kMarginT + plot_h << "' x2='" << sx(t)
            << "' y2='" << kMarginT + plot_h + 5 << "' stroke='black'/>\n";
        svg << "<text x='" << sx(t) << "' y='" << kMarginT + plot_h + 20
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << fmt(t)
            << "</text>\n";
    }
    const double ystep = nice_step(ymax - ymin);
    for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-9; t += ystep) {
        svg << "<line x1='" << kMarginL - 5 << "' y1='" << sy(t) << "' x2='" << kMarginL
            << "' y2='" << sy(t) << "' stroke='black'/>\n";
        svg << "<line x1='" << kMarginL << "' y1='" << sy(t) << "' x2='" << kMarginL + plot_w
            << "' y2='" << sy(t) << "' stroke='#dddddd'/>\n";
        svg << "<text x='" << kMarginL - 9 << "' y='" << sy(t) + 4
            << "' text-anchor='end' font-size='11' font-family='sans-serif'>" << fmt(t)
            << "</text>\n";
    }
    svg << "<text x='" << kMarginL + plot_w / 2 << "' y='" << kHeight - 12
        << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << x_label
        << "</text>\n";
    svg << "<text x='18' y='" << kMarginT + plot_h / 2
        << "' text-anchor='middle' font-size='13' font-family='sans-serif' transform='rotate(-90 "
        << 18 << " " << kMarginT + plot_h / 2 << ")'>" << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
        for (std::size_t i = 0; i < x.size(); ++i)
            svg << sx(x[i]) << "," << sy(series[si].y[i]) << " ";
        svg << "'/>\n";
        for (std::size_t i = 0; i < x.size(); ++i)
            svg << "<circle cx='" << sx(x[i]) << "' cy='" << sy(series[si].y[i])
                << "' r='3' fill='" << color << "'/>\n";
        // legend
        const double ly = kMarginT + 14 + 18 * static_cast<double>(si);
        svg << "<line x1='" << kMarginL + plot_w - 180 << "' y1='" << ly << "' x2='"
            << kMarginL + plot_w - 156 << "' y2='" << ly << "' stroke='" << color
            << "' stroke-width='2'/>\n";
        svg << "<text x='" << kMarginL + plot_w - 150 << "' y='" << ly + 4
            << "' font-size='11' font-family='sans-serif'>" << series[si].label << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write chart: " + path);
    out << svg.str();
    if (!out) throw std::runtime_error("short write for chart: " + path);
}

}  // namespace deepbroadcast::eval
