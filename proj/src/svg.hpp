// Minimal deterministic SVG line plots. No external assets, byte-stable
// output for golden-file testing.
#pragma once

#include <string>
#include <vector>

namespace revgn::cli {

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
};

struct PlotSeries {
    std::string label;
    std::vector<PlotPoint> mean;
    std::vector<PlotPoint> lo;  // optional band, same x grid as mean
    std::vector<PlotPoint> hi;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
};

std::string render_plot_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);
void write_plot_svg(const std::string& path, const PlotSpec& spec,
                    const std::vector<PlotSeries>& series);

}  // namespace revgn::cli
