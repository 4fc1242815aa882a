#include "terra/report/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "terra/common.hpp"

namespace terra::report {

namespace {

constexpr double kWidth = 680.0, kHeight = 480.0;
constexpr double kLeft = 70.0, kRight = 24.0, kTop = 40.0, kBottom = 56.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Axis {
    double lo = 0.0, hi = 1.0;
    double to_px(double v, double px0, double px1) const {
        return px0 + (v - lo) / (hi - lo) * (px1 - px0);
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void svg_header(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
}

void axis_labels(std::ofstream& out, const std::string& xlabel, const std::string& ylabel) {
    out << "<text x=\"" << (kLeft + (kWidth - kRight - kLeft) / 2) << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel
        << "</text>\n"
        << "<text x=\"18\" y=\"" << (kTop + (kHeight - kBottom - kTop) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 18 " << (kTop + (kHeight - kBottom - kTop) / 2) << ")\">"
        << ylabel << "</text>\n";
}

void frame(std::ofstream& out) {
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
        << "\" height=\"" << kHeight - kTop - kBottom
        << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
}

}  // namespace

void write_loglog_plot(const std::filesystem::path& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<LineSeries>& series) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());

    double xmin = std::numeric_limits<double>::max(), xmax = 0.0;
    double ymin = std::numeric_limits<double>::max(), ymax = 0.0;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            require(p[0] > 0.0 && p[1] > 0.0, "log-log plot needs positive values");
            xmin = std::min(xmin, p[0]);
            xmax = std::max(xmax, p[0]);
            ymin = std::min(ymin, std::max(p[2], p[1] * 0.5));
            ymax = std::max(ymax, std::max(p[3], p[1]));
        }
    require(xmin < xmax && ymin <= ymax, "log-log plot needs at least two distinct x values");

    Axis x{std::log10(xmin / 1.15), std::log10(xmax * 1.15)};
    Axis y{std::log10(ymin / 1.3), std::log10(ymax * 1.3)};
    const double px0 = kLeft, px1 = kWidth - kRight;
    const double py0 = kHeight - kBottom, py1 = kTop;  // y grows upward

    svg_header(out, title);
    frame(out);
    axis_labels(out, xlabel, ylabel);

    // decade (and 2x/5x) gridlines
    for (int axis = 0; axis < 2; ++axis) {
        const Axis& a = axis == 0 ? x : y;
        for (int e = static_cast<int>(std::floor(a.lo)) - 1; e <= static_cast<int>(std::ceil(a.hi));
             ++e)
            for (double mant : {1.0, 2.0, 5.0}) {
                const double v = std::log10(mant) + e;
                if (v < a.lo || v > a.hi) continue;
                const bool decade = mant == 1.0;
                if (axis == 0) {
                    const double px = a.to_px(v, px0, px1);
                    out << "<line x1=\"" << px << "\" y1=\"" << py0 << "\" x2=\"" << px
                        << "\" y2=\"" << py1 << "\" stroke=\"#ddd\" stroke-width=\""
                        << (decade ? 1.0 : 0.5) << "\"/>\n";
                    out << "<text x=\"" << px << "\" y=\"" << py0 + 16
                        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                        << "font-size=\"10\">" << fmt(mant * std::pow(10.0, e)) << "</text>\n";
                } else {
                    const double py = a.to_px(v, py0, py1);
                    out << "<line x1=\"" << px0 << "\" y1=\"" << py << "\" x2=\"" << px1
                        << "\" y2=\"" << py << "\" stroke=\"#ddd\" stroke-width=\""
                        << (decade ? 1.0 : 0.5) << "\"/>\n";
                    out << "<text x=\"" << px0 - 6 << "\" y=\"" << py + 3
                        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
                        << "font-size=\"10\">" << fmt(mant * std::pow(10.0, e)) << "</text>\n";
                }
            }
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const std::string color =
            s.color.empty() ? kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))] : s.color;

        // IQR band
        std::string band;
        bool has_band = false;
        for (const auto& p : s.points)
            if (p[3] > p[2]) has_band = true;
        if (has_band) {
            for (const auto& p : s.points)
                band += fmt(x.to_px(std::log10(p[0]), px0, px1)) + "," +
                        fmt(y.to_px(std::log10(std::max(p[3], 1e-12)), py0, py1)) + " ";
            for (auto it = s.points.rbegin(); it != s.points.rend(); ++it)
                band += fmt(x.to_px(std::log10((*it)[0]), px0, px1)) + "," +
                        fmt(y.to_px(std::log10(std::max((*it)[2], 1e-12)), py0, py1)) + " ";
            out << "<polygon points=\"" << band << "\" fill=\"" << color
                << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }

        std::string line;
        for (const auto& p : s.points)
            line += fmt(x.to_px(std::log10(p[0]), px0, px1)) + "," +
                    fmt(y.to_px(std::log10(p[1]), py0, py1)) + " ";
        out << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        for (const auto& p : s.points)
            out << "<circle cx=\"" << x.to_px(std::log10(p[0]), px0, px1) << "\" cy=\""
                << y.to_px(std::log10(p[1]), py0, py1) << "\" r=\"3.5\" fill=\"" << color
                << "\"/>\n";

        out << "<rect x=\"" << px1 - 150 << "\" y=\"" << kTop + 10 + 18 * static_cast<double>(si)
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n"
            << "<text x=\"" << px1 - 132 << "\" y=\"" << kTop + 20 + 18 * static_cast<double>(si)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";
}

void write_scatter_plot(const std::filesystem::path& path, const std::string& title,
                        const std::vector<ScatterPoint>& points,
                        const std::vector<std::string>& color_names,
                        const std::vector<std::string>& shape_names) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    require(!points.empty(), "scatter plot needs points");

    double xmin = points[0].x, xmax = points[0].x, ymin = points[0].y, ymax = points[0].y;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double xpad = std::max(1e-9, (xmax - xmin) * 0.06);
    const double ypad = std::max(1e-9, (ymax - ymin) * 0.06);
    Axis x{xmin - xpad, xmax + xpad};
    Axis y{ymin - ypad, ymax + ypad};
    const double px0 = kLeft, px1 = kWidth - kRight;
    const double py0 = kHeight - kBottom, py1 = kTop;

    svg_header(out, title);
    frame(out);

    auto draw_marker = [&](double cx, double cy, int shape, const std::string& color, double r) {
        if (shape % 3 == 0) {
            out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\" fill=\""
                << color << "\" fill-opacity=\"0.8\"/>\n";
        } else if (shape % 3 == 1) {
            out << "<path d=\"M " << cx << " " << cy - r << " L " << cx + r << " " << cy + r
                << " L " << cx - r << " " << cy + r << " Z\" fill=\"" << color
                << "\" fill-opacity=\"0.8\"/>\n";
        } else {
            out << "<rect x=\"" << cx - r << "\" y=\"" << cy - r << "\" width=\"" << 2 * r
                << "\" height=\"" << 2 * r << "\" fill=\"" << color
                << "\" fill-opacity=\"0.8\"/>\n";
        }
    };

    for (const auto& p : points) {
        const std::string color =
            kPalette[static_cast<std::size_t>(p.color) % (sizeof(kPalette) / sizeof(kPalette[0]))];
        draw_marker(x.to_px(p.x, px0, px1), y.to_px(p.y, py0, py1), p.shape, color, 3.2);
    }

    double ly = kTop + 10;
    for (std::size_t i = 0; i < color_names.size(); ++i) {
        out << "<rect x=\"" << px1 - 150 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
            << kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))] << "\"/>\n"
            << "<text x=\"" << px1 - 132 << "\" y=\"" << ly + 10
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << color_names[i] << "</text>\n";
        ly += 16;
    }
    ly += 6;
    for (std::size_t i = 0; i < shape_names.size(); ++i) {
        draw_marker(px1 - 144, ly + 5, static_cast<int>(i), "#444", 4.0);
        out << "<text x=\"" << px1 - 132 << "\" y=\"" << ly + 10
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << shape_names[i] << "</text>\n";
        ly += 16;
    }
    out << "</svg>\n";
}

}  // namespace terra::report
