#include "ibrid/svgplot.hpp"

#include "ibrid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace ibrid {

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_line(const std::string& name, std::span<const double> x,
                       std::span<const double> y, const std::string& color) {
    if (x.size() != y.size()) throw ContractError("SvgPlot: x/y size mismatch");
    series_.push_back({name, {x.begin(), x.end()}, {y.begin(), y.end()}, color, false});
}

void SvgPlot::add_stems(const std::string& name, std::span<const double> x,
                        std::span<const double> y, const std::string& color) {
    if (x.size() != y.size()) throw ContractError("SvgPlot: x/y size mismatch");
    series_.push_back({name, {x.begin(), x.end()}, {y.begin(), y.end()}, color, true});
}

void SvgPlot::add_hband(double y_low, double y_high, const std::string& color) {
    bands_.push_back({y_low, y_high});
    band_colors_.push_back(color);
}

void SvgPlot::write(const std::filesystem::path& path) const {
    const double width = 880, height = 420;
    const double ml = 70, mr = 160, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : series_) {
        for (double v : s.x) {
            x_min = std::min(x_min, v);
            x_max = std::max(x_max, v);
        }
        for (double v : s.y) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
        if (s.stems) {
            y_min = std::min(y_min, 0.0);
            y_max = std::max(y_max, 0.0);
        }
    }
    for (const auto& b : bands_) {
        y_min = std::min(y_min, b[0]);
        y_max = std::max(y_max, b[1]);
    }
    if (!(x_max > x_min)) x_max = x_min + 1.0;
    if (!(y_max > y_min)) y_max = y_min + 1.0;
    const double pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
           num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">" + title_ + "</text>\n";

    for (std::size_t b = 0; b < bands_.size(); ++b) {
        const double y0 = py(bands_[b][1]), y1 = py(bands_[b][0]);
        out += "<rect x=\"" + num(ml) + "\" y=\"" + num(y0) + "\" width=\"" + num(pw) +
               "\" height=\"" + num(y1 - y0) + "\" fill=\"" + band_colors_[b] +
               "\" fill-opacity=\"0.25\"/>\n";
    }

    out += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) +
           "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int g = 0; g <= 4; ++g) {
        const double yv = y_min + (y_max - y_min) * g / 4.0;
        const double xv = x_min + (x_max - x_min) * g / 4.0;
        out += "<text x=\"" + num(ml - 6) + "\" y=\"" + num(py(yv) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" + num(yv) +
               "</text>\n";
        out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(height - mb + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" + num(xv) +
               "</text>\n";
    }
    out += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(height - 10) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" + x_label_ +
           "</text>\n";
    out += "<text x=\"18\" y=\"" + num(mt + ph / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 18 " + num(mt + ph / 2) + ")\">" + y_label_ + "</text>\n";

    double legend_y = mt + 14;
    for (const auto& s : series_) {
        if (s.stems) {
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                out += "<line x1=\"" + num(px(s.x[k])) + "\" y1=\"" + num(py(0.0)) + "\" x2=\"" +
                       num(px(s.x[k])) + "\" y2=\"" + num(py(s.y[k])) + "\" stroke=\"" + s.color +
                       "\" stroke-width=\"1.5\"/>\n";
                out += "<circle cx=\"" + num(px(s.x[k])) + "\" cy=\"" + num(py(s.y[k])) +
                       "\" r=\"2.4\" fill=\"" + s.color + "\"/>\n";
            }
        } else if (!s.x.empty()) {
            // decimate long traces; the SVG stays inspectable either way
            const std::size_t stride = std::max<std::size_t>(1, s.x.size() / 4000);
            out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.2\" points=\"";
            for (std::size_t k = 0; k < s.x.size(); k += stride)
                out += num(px(s.x[k])) + "," + num(py(s.y[k])) + " ";
            out += num(px(s.x.back())) + "," + num(py(s.y.back()));
            out += "\"/>\n";
        }
        out += "<line x1=\"" + num(width - mr + 10) + "\" y1=\"" + num(legend_y - 4) + "\" x2=\"" +
               num(width - mr + 34) + "\" y2=\"" + num(legend_y - 4) + "\" stroke=\"" + s.color +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + num(width - mr + 40) + "\" y=\"" + num(legend_y) +
               "\" font-size=\"12\" font-family=\"sans-serif\">" + s.name + "</text>\n";
        legend_y += 18;
    }
    out += "</svg>\n";

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ParseError("SvgPlot: cannot open '" + tmp.string() + "'");
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw ParseError("SvgPlot: write failed");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ibrid
