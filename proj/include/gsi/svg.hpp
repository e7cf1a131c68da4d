#pragma once

#include <string>
#include <utility>
#include <vector>

namespace gsi {

struct ChartSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<ChartSeries> series;
};

/// Minimal standalone SVG line chart with linear axes and a legend.
std::string render_svg(const LineChart& chart);

} // namespace gsi
