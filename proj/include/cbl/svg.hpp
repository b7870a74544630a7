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

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cbl {

/// One plotted curve. Bold series (the run means) get a wider stroke and a
/// legend entry; thin series share the color of their family.
struct Series {
    std::string label;  // empty labels are excluded from the legend
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    double stroke_width = 1.0;
    bool dashed = false;
};

struct SvgStyle {
    int width = 900;
    int height = 540;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::optional<double> dashed_hline;  // horizontal reference line
};

/// Self-contained deterministic SVG: same input, same bytes.
std::string render_svg(const std::vector<Series>& series, const SvgStyle& style);

/// Round-trip double formatting ("%.17g"), shared by all text artifacts.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace cbl
