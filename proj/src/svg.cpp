#include "gsi/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gsi {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        } else if (hi == lo) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

} // namespace

std::string render_svg(const LineChart& chart) {
    Range xr, yr;
    for (const auto& s : chart.series)
        for (const auto& [x, y] : s.points) {
            xr.include(x);
            yr.include(y);
        }
    xr.pad();
    yr.pad();

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(chart.title)
      << "</text>\n";
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (int t = 0; t <= 4; ++t) {
        const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
        o << "<text x=\"" << sx(fx) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << num(fx)
          << "</text>\n";
        o << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(fy) + 4 << "\" text-anchor=\"end\">" << num(fy)
          << "</text>\n";
        o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << sy(fy) << "\" y2=\"" << sy(fy)
          << "\" stroke=\"#ddd\"/>\n";
    }
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(chart.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(chart.y_label) << "</text>\n";

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            o << (first ? "" : " ") << sx(x) << ',' << sy(y);
            first = false;
        }
        o << "\"/>\n";
        for (const auto& [x, y] : s.points)
            if (std::isfinite(x) && std::isfinite(y))
                o << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << kLeft + pw + 12 << "\" x2=\"" << kLeft + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

} // namespace gsi
