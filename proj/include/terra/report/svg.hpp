#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace terra::report {

// One curve on a log-log plot: (x, y, band_lo, band_hi) per point.
struct LineSeries {
    std::string name;
    std::string color;
    std::vector<std::array<double, 4>> points;
};

void write_loglog_plot(const std::filesystem::path& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<LineSeries>& series);

// Scatter colored by one categorical key and shaped by another (circles,
// then triangles, then squares per shape index).
struct ScatterPoint {
    double x = 0.0, y = 0.0;
    int color = 0;
    int shape = 0;
};

void write_scatter_plot(const std::filesystem::path& path, const std::string& title,
                        const std::vector<ScatterPoint>& points,
                        const std::vector<std::string>& color_names,
                        const std::vector<std::string>& shape_names);

}  // namespace terra::report
