#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wirepinn::cli {

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool markers = false;  ///< scatter points instead of a polyline
};

struct PlotSpec {
    std::string title, x_label, y_label;
    bool log_y = false;
};

/// Static SVG line/scatter plot with linear x and linear or log10 y axes.
void write_svg(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace wirepinn::cli
