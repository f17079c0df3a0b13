#pragma once

#include <string>
#include <vector>

namespace evergreen {

struct Series {
    enum class Style { line, scatter };
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    Style style = Style::line;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    bool legend = true;
    bool diagonal = false;  // dashed y = x reference, drawn as a <line>
};

/// Standalone SVG: axes and ticks as <line>, each line series as exactly one
/// <polyline>, scatter points as <circle>, legend swatches as <rect>.
/// Non-finite points are skipped.
std::string render_svg(const PlotSpec& spec);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

}  // namespace evergreen
