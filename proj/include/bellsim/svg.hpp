#pragma once

// Minimal SVG line plots: polylines over a shared axis box.

#include <filesystem>
#include <string>
#include <vector>

namespace bellsim {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    /// Circles at the data points in addition to the line.
    bool markers = false;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    /// Legend entries are drawn for the first few labelled series only.
    std::size_t legend_limit = 6;
};

/// Axis ticks show the data range only, so every printed number comes from the data.
std::string render_svg(const Plot& plot, int width = 720, int height = 420);

void write_svg(const std::filesystem::path& path, const Plot& plot);

} // namespace bellsim
