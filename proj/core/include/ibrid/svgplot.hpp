#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ibrid {

/// Minimal SVG line/stem plotter for report emission (measured-vs-model
/// overlays and correlation stems with confidence bands). Not a general
/// plotting library; just enough for reproducible report artifacts.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string x_label, std::string y_label);

    void add_line(const std::string& name, std::span<const double> x, std::span<const double> y,
                  const std::string& color);
    /// Vertical stems from y=0 at the given x positions.
    void add_stems(const std::string& name, std::span<const double> x, std::span<const double> y,
                   const std::string& color);
    /// Horizontal band spanning the full x range (confidence bounds).
    void add_hband(double y_low, double y_high, const std::string& color);

    void write(const std::filesystem::path& path) const;

private:
    struct Series {
        std::string name;
        std::vector<double> x, y;
        std::string color;
        bool stems;
    };
    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
    std::vector<std::array<double, 2>> bands_;
    std::vector<std::string> band_colors_;
};

} // namespace ibrid
