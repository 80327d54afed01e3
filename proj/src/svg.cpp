#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace revgn::cli {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 18, kTop = 36, kBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Range {
    double lo = 0.0, hi = 1.0;
};

Range nice_range(double lo, double hi) {
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

std::vector<double> linear_ticks(const Range& r) {
    double span = r.hi - r.lo;
    double raw = span / 5.0;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    std::vector<double> ticks;
    double first = std::ceil(r.lo / step) * step;
    for (double t = first; t <= r.hi + 1e-12 * span; t += step) ticks.push_back(t);
    return ticks;
}

}  // namespace

std::string render_plot_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    if (series.empty()) throw std::invalid_argument("render_plot_svg: empty selection");

    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    bool any_point = false;
    for (const auto& s : series)
        for (const auto* part : {&s.mean, &s.lo, &s.hi})
            for (const auto& p : *part) {
                if (spec.log_y && p.y <= 0.0) continue;
                x_min = std::min(x_min, p.x);
                x_max = std::max(x_max, p.x);
                y_min = std::min(y_min, p.y);
                y_max = std::max(y_max, p.y);
                any_point = true;
            }
    if (!any_point) throw std::invalid_argument("render_plot_svg: no drawable points");

    Range xr = nice_range(x_min, x_max);
    Range yr;
    bool log_y = spec.log_y;
    if (log_y) {
        yr = {std::log10(y_min) - 0.05, std::log10(y_max) + 0.05};
        if (yr.hi - yr.lo < 0.2) {
            yr.lo -= 0.1;
            yr.hi += 0.1;
        }
    } else {
        yr = nice_range(y_min, y_max);
    }

    auto sx = [&](double x) {
        return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight);
    };
    auto sy = [&](double y) {
        double v = log_y ? std::log10(std::max(y, 1e-300)) : y;
        return kHeight - kBottom - (v - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
    };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    o << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\""
      << " text-anchor=\"middle\">" << spec.title << "</text>\n";

    // frame
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
      << "\" height=\"" << kHeight - kTop - kBottom
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

    // x ticks
    for (double t : linear_ticks(xr)) {
        double px = sx(t);
        o << "<line x1=\"" << num(px) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << num(px)
          << "\" y2=\"" << kHeight - kBottom + 5 << "\" stroke=\"#333333\"/>\n";
        o << "<text x=\"" << num(px) << "\" y=\"" << kHeight - kBottom + 18
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << num(t)
          << "</text>\n";
    }
    // y ticks
    if (log_y) {
        int lo_dec = static_cast<int>(std::floor(yr.lo));
        int hi_dec = static_cast<int>(std::ceil(yr.hi));
        int stride = std::max(1, (hi_dec - lo_dec) / 6);
        for (int e = lo_dec; e <= hi_dec; e += stride) {
            if (e < yr.lo - 1e-9 || e > yr.hi + 1e-9) continue;
            double py = kHeight - kBottom -
                        (e - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
            o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << kLeft
              << "\" y2=\"" << num(py) << "\" stroke=\"#333333\"/>\n";
            o << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py + 4)
              << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">1e" << e
              << "</text>\n";
        }
    } else {
        for (double t : linear_ticks(yr)) {
            double py = sy(t);
            o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << kLeft
              << "\" y2=\"" << num(py) << "\" stroke=\"#333333\"/>\n";
            o << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py + 4)
              << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << num(t)
              << "</text>\n";
        }
    }
    o << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 14
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << spec.x_label
      << "</text>\n";
    o << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 16 " << (kTop + kHeight - kBottom) / 2 << ")\">" << spec.y_label
      << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const PlotSeries& s = series[i];
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        if (!s.lo.empty() && s.lo.size() == s.hi.size()) {
            o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
            for (const auto& p : s.lo) o << num(sx(p.x)) << "," << num(sy(p.y)) << " ";
            for (std::size_t k = s.hi.size(); k-- > 0;)
                o << num(sx(s.hi[k].x)) << "," << num(sy(s.hi[k].y)) << " ";
            o << "\"/>\n";
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : s.mean) o << num(sx(p.x)) << "," << num(sy(p.y)) << " ";
        o << "\"/>\n";
        double ly = kTop + 16 + 16 * static_cast<double>(i);
        o << "<line x1=\"" << kWidth - kRight - 130 << "\" y1=\"" << num(ly - 4) << "\" x2=\""
          << kWidth - kRight - 110 << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << kWidth - kRight - 105 << "\" y=\"" << num(ly)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_plot_svg(const std::string& path, const PlotSpec& spec,
                    const std::vector<PlotSeries>& series) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << render_plot_svg(spec, series);
}

}  // namespace revgn::cli
