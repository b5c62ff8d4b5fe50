#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "biphoton/errors.hpp"

namespace biphoton {

// Minimal SVG emitters for the optional plot artifacts. CSV stays the
// machine-readable contract; these are for eyeballing runs.
namespace svg {

struct Series {
    std::string label;
    std::string color = "#1f6fb2";
    std::vector<double> xs;
    std::vector<double> ys;
    bool points_only = false;
};

inline std::string format(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

/// Line/scatter plot of one or more series with auto-scaled axes.
inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::vector<Series>& series) {
    constexpr double kW = 640, kH = 420, kL = 64, kR = 16, kT = 36, kB = 44;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const Series& s : series)
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
            if (first) {
                xmin = xmax = s.xs[i];
                ymin = ymax = s.ys[i];
                first = false;
            }
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            ymin = std::min(ymin, s.ys[i]);
            ymax = std::max(ymax, s.ys[i]);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double px = (kW - kL - kR) / (xmax - xmin);
    const double py = (kH - kT - kB) / (ymax - ymin);
    auto X = [&](double x) { return kL + (x - xmin) * px; };
    auto Y = [&](double y) { return kH - kB - (y - ymin) * py; };

    std::ofstream os(path);
    if (!os) throw IoError(path + ": cannot open for writing");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n"
       << "<rect width='100%' height='100%' fill='white'/>\n"
       << "<text x='" << kW / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
       << "</text>\n"
       << "<line x1='" << kL << "' y1='" << kH - kB << "' x2='" << kW - kR << "' y2='" << kH - kB
       << "' stroke='black'/>\n"
       << "<line x1='" << kL << "' y1='" << kT << "' x2='" << kL << "' y2='" << kH - kB
       << "' stroke='black'/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = xmin + (xmax - xmin) * t / 4.0;
        const double yv = ymin + (ymax - ymin) * t / 4.0;
        os << "<text x='" << X(xv) << "' y='" << kH - kB + 16
           << "' text-anchor='middle' font-size='10'>" << format(xv) << "</text>\n"
           << "<text x='" << kL - 6 << "' y='" << Y(yv) + 3
           << "' text-anchor='end' font-size='10'>" << format(yv) << "</text>\n";
    }
    double legend_y = kT + 4;
    for (const Series& s : series) {
        if (!s.points_only) {
            os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
            for (std::size_t i = 0; i < s.xs.size(); ++i)
                os << X(s.xs[i]) << "," << Y(s.ys[i]) << " ";
            os << "'/>\n";
        } else {
            for (std::size_t i = 0; i < s.xs.size(); ++i)
                os << "<circle cx='" << X(s.xs[i]) << "' cy='" << Y(s.ys[i])
                   << "' r='2.2' fill='" << s.color << "'/>\n";
        }
        os << "<text x='" << kW - kR - 4 << "' y='" << legend_y
           << "' text-anchor='end' font-size='11' fill='" << s.color << "'>" << s.label
           << "</text>\n";
        legend_y += 14;
    }
    os << "</svg>\n";
}

/// Grayscale-to-blue heatmap of a square matrix (row 0 at the top).
inline void write_heatmap(const std::string& path, const std::string& title,
                          const std::vector<double>& values, std::size_t n) {
    if (values.size() != n * n) throw ValidationError("heatmap expects an n*n matrix");
    double vmax = 0.0;
    for (const double v : values) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0.0) vmax = 1.0;
    const double cell = std::max(2.0, 512.0 / double(n));
    const double size = cell * double(n);
    std::ofstream os(path);
    if (!os) throw IoError(path + ": cannot open for writing");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size + 24
       << "'>\n<text x='" << size / 2 << "' y='14' text-anchor='middle' font-size='12'>" << title
       << "</text>\n<g transform='translate(0,24)'>\n";
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double v = values[r * n + c] / vmax; // [-1, 1]
            const int blue = int(std::lround(std::clamp(v, 0.0, 1.0) * 255));
            const int red = int(std::lround(std::clamp(-v, 0.0, 1.0) * 255));
            os << "<rect x='" << double(c) * cell << "' y='" << double(r) * cell << "' width='"
               << cell << "' height='" << cell << "' fill='rgb(" << 255 - blue << ","
               << 255 - blue - red << "," << 255 - red << ")'/>\n";
        }
    os << "</g>\n</svg>\n";
}

} // namespace svg
} // namespace biphoton
