/*
 * Copyright 2026 The cblab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cbl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cbl {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string coord(double v) { return fmt("%.2f", v); }
std::string tick_label(double v) { return fmt("%.4g", v); }

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (lo == hi) {
            lo -= 1.0;
            hi += 1.0;
        } else {
            const double margin = 0.05 * (hi - lo);
            lo -= margin;
            hi += margin;
        }
    }
};

}  // namespace

std::string format_double(double v) { return fmt("%.17g", v); }

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_text_file: cannot open " + path);
    out << content;
    if (!out) throw std::runtime_error("write_text_file: write failed for " + path);
}

std::string render_svg(const std::vector<Series>& series, const SvgStyle& style) {
    if (series.empty()) throw std::invalid_argument("render_svg: no series");
    Range xr, yr;
    for (const auto& s : series) {
        if (s.x.empty() || s.x.size() != s.y.size())
            throw std::invalid_argument("render_svg: series '" + s.label + "' is empty or ragged");
        for (double v : s.x) {
            if (!std::isfinite(v)) throw std::invalid_argument("render_svg: non-finite x value");
            xr.include(v);
        }
        for (double v : s.y) {
            if (!std::isfinite(v)) throw std::invalid_argument("render_svg: non-finite y value");
            yr.include(v);
        }
    }
    if (style.dashed_hline) yr.include(*style.dashed_hline);
    xr.pad();
    yr.pad();

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double plot_w = style.width - left - right;
    const double plot_h = style.height - top - bottom;
    const auto sx = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    const auto sy = [&](double v) {
        return top + plot_h - (v - yr.lo) / (yr.hi - yr.lo) * plot_h;
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\""
        << style.height << "\" viewBox=\"0 0 " << style.width << " " << style.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty())
        out << "<text x=\"" << coord(left + plot_w / 2) << "\" y=\"22\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"15\">" << style.title << "</text>\n";

    // Axes and ticks.
    out << "<g stroke=\"#333333\" stroke-width=\"1\" fill=\"none\">\n";
    out << "<path d=\"M" << coord(left) << " " << coord(top) << " V" << coord(top + plot_h)
        << " H" << coord(left + plot_w) << "\"/>\n";
    out << "</g>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    constexpr int kTicks = 5;
    for (int t = 0; t <= kTicks; ++t) {
        const double fx = xr.lo + (xr.hi - xr.lo) * t / kTicks;
        const double fy = yr.lo + (yr.hi - yr.lo) * t / kTicks;
        out << "<line x1=\"" << coord(sx(fx)) << "\" y1=\"" << coord(top + plot_h) << "\" x2=\""
            << coord(sx(fx)) << "\" y2=\"" << coord(top + plot_h + 4)
            << "\" stroke=\"#333333\"/>\n";
        out << "<text x=\"" << coord(sx(fx)) << "\" y=\"" << coord(top + plot_h + 16)
            << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
        out << "<line x1=\"" << coord(left - 4) << "\" y1=\"" << coord(sy(fy)) << "\" x2=\""
            << coord(left) << "\" y2=\"" << coord(sy(fy)) << "\" stroke=\"#333333\"/>\n";
        out << "<text x=\"" << coord(left - 8) << "\" y=\"" << coord(sy(fy) + 4)
            << "\" text-anchor=\"end\">" << tick_label(fy) << "</text>\n";
    }
    if (!style.x_label.empty())
        out << "<text x=\"" << coord(left + plot_w / 2) << "\" y=\""
            << coord(style.height - 12) << "\" text-anchor=\"middle\">" << style.x_label
            << "</text>\n";
    if (!style.y_label.empty())
        out << "<text x=\"14\" y=\"" << coord(top + plot_h / 2)
            << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << coord(top + plot_h / 2)
            << ")\">" << style.y_label << "</text>\n";
    out << "</g>\n";

    if (style.dashed_hline) {
        const double y = sy(*style.dashed_hline);
        out << "<line x1=\"" << coord(left) << "\" y1=\"" << coord(y) << "\" x2=\""
            << coord(left + plot_w) << "\" y2=\"" << coord(y)
            << "\" stroke=\"#555555\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n";
    }

    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\""
            << fmt("%.2f", s.stroke_width) << "\"";
        if (s.dashed) out << " stroke-dasharray=\"6 4\"";
        out << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) out << " ";
            out << coord(sx(s.x[i])) << "," << coord(sy(s.y[i]));
        }
        out << "\"/>\n";
    }

    // Legend: labelled series only, top-right corner.
    int entry = 0;
    out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
    for (const auto& s : series) {
        if (s.label.empty()) continue;
        const double y = top + 10 + 18 * entry;
        const double x = left + plot_w - 170;
        out << "<line x1=\"" << coord(x) << "\" y1=\"" << coord(y - 4) << "\" x2=\""
            << coord(x + 24) << "\" y2=\"" << coord(y - 4) << "\" stroke=\"" << s.color
            << "\" stroke-width=\"" << fmt("%.2f", s.stroke_width) << "\""
            << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
        out << "<text x=\"" << coord(x + 30) << "\" y=\"" << coord(y) << "\">" << s.label
            << "</text>\n";
        ++entry;
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

}  // namespace cbl
