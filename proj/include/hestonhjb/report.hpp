#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hestonhjb {

// Deterministic shortest-ish formatting; reruns must produce identical bytes.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file " + path);
    return os;
}

struct HeatmapData {
    std::string title;
    int n_x = 0;
    int n_y = 0;
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
    std::string x_label = "S";
    std::string y_label = "v";
    std::vector<double> values;  // row-major, y-major: values[iy*n_x + ix]
};

namespace detail {

inline std::array<int, 3> colormap(double t) {
    // 5-stop linear map, dark blue to yellow
    static const double stops[5][3] = {{0.267, 0.005, 0.329},
                                       {0.229, 0.322, 0.545},
                                       {0.127, 0.566, 0.551},
                                       {0.369, 0.789, 0.383},
                                       {0.993, 0.906, 0.144}};
    t = std::clamp(t, 0.0, 1.0);
    double pos = t * 4.0;
    int k = std::min(3, static_cast<int>(pos));
    double f = pos - k;
    std::array<int, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
        double v = stops[k][c] + f * (stops[k + 1][c] - stops[k][c]);
        rgb[static_cast<std::size_t>(c)] = static_cast<int>(std::lround(255.0 * v));
    }
    return rgb;
}

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// Self-contained SVG heatmap with a linear color map and a two-decimal
// legend. Rendered natively so figures carry no external dependency.
inline void write_heatmap_svg(const std::string& path, const HeatmapData& data) {
    const int plot_w = 560, plot_h = 420;
    const int margin_l = 70, margin_t = 40, margin_b = 50, legend_w = 80;
    const int width = margin_l + plot_w + legend_w + 40;
    const int height = margin_t + plot_h + margin_b;

    double lo = data.values.empty() ? 0.0 : *std::min_element(data.values.begin(), data.values.end());
    double hi = data.values.empty() ? 1.0 : *std::max_element(data.values.begin(), data.values.end());
    if (hi - lo < 1e-300) hi = lo + 1.0;

    auto os = open_output(path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    os << "<text x=\"" << margin_l << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">"
       << data.title << "</text>\n";

    double cw = static_cast<double>(plot_w) / data.n_x;
    double ch = static_cast<double>(plot_h) / data.n_y;
    for (int iy = 0; iy < data.n_y; ++iy) {
        for (int ix = 0; ix < data.n_x; ++ix) {
            double v = data.values[static_cast<std::size_t>(iy * data.n_x + ix)];
            auto rgb = detail::colormap((v - lo) / (hi - lo));
            double px = margin_l + ix * cw;
            // y axis points up
            double py = margin_t + plot_h - (iy + 1) * ch;
            os << "<rect x=\"" << detail::fixed2(px) << "\" y=\"" << detail::fixed2(py)
               << "\" width=\"" << detail::fixed2(cw + 0.5) << "\" height=\""
               << detail::fixed2(ch + 0.5) << "\" fill=\"rgb(" << rgb[0] << "," << rgb[1] << ","
               << rgb[2] << ")\"/>\n";
        }
    }

    // axes labels
    os << "<text x=\"" << margin_l << "\" y=\"" << height - 16
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << data.x_label << " = "
       << detail::fixed2(data.x_min) << "</text>\n";
    os << "<text x=\"" << margin_l + plot_w - 60 << "\" y=\"" << height - 16
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << data.x_label << " = "
       << detail::fixed2(data.x_max) << "</text>\n";
    os << "<text x=\"8\" y=\"" << margin_t + plot_h
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << data.y_label << " = "
       << detail::fixed2(data.y_min) << "</text>\n";
    os << "<text x=\"8\" y=\"" << margin_t + 12
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << data.y_label << " = "
       << detail::fixed2(data.y_max) << "</text>\n";

    // legend bar
    int lx = margin_l + plot_w + 20;
    int bars = 64;
    double bh = static_cast<double>(plot_h) / bars;
    for (int k = 0; k < bars; ++k) {
        auto rgb = detail::colormap((k + 0.5) / bars);
        double py = margin_t + plot_h - (k + 1) * bh;
        os << "<rect x=\"" << lx << "\" y=\"" << detail::fixed2(py) << "\" width=\"18\" height=\""
           << detail::fixed2(bh + 0.5) << "\" fill=\"rgb(" << rgb[0] << "," << rgb[1] << ","
           << rgb[2] << ")\"/>\n";
    }
    os << "<text x=\"" << lx + 24 << "\" y=\"" << margin_t + plot_h
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::fixed2(lo) << "</text>\n";
    os << "<text x=\"" << lx + 24 << "\" y=\"" << margin_t + 12
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::fixed2(hi) << "</text>\n";
    os << "</svg>\n";
}

}  // namespace hestonhjb
