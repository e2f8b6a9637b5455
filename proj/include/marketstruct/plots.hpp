/**
 * @file plots.hpp
 * @brief Static SVG renderers. Output depends only on the inputs, byte for byte.
 */
#pragma once

#include "marketstruct/mjw.hpp"
#include "marketstruct/rmt.hpp"
#include "marketstruct/sectors.hpp"
#include "marketstruct/spectra.hpp"

namespace marketstruct {

/// Eigenvalue histogram (area 1) with the Marchenko-Pastur density sampled on the same axis.
struct DensityPlotData {
    double x_min = 0.0;
    double x_max = 0.0;  // max(lambda_1, lambda_+) * 1.1
    std::vector<double> bin_edges;
    std::vector<double> bin_heights;
    std::vector<double> curve_x;
    std::vector<double> curve_y;
};

DensityPlotData density_plot_data(const Vector& eigenvalues, const MPBounds& bounds, int bins = 40,
                                  int curve_points = 801);

std::string density_svg(const DensityPlotData& data, const std::string& title);

struct Line {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

std::string lines_svg(std::span<const Line> lines, const std::string& title, const std::string& y_label);

std::string dendrogram_svg(const Dendrogram& d, const std::string& title);

/// Series with one vertical rule per candidate changepoint location; opacity is the
/// location's probability relative to the most probable location of that changepoint.
std::string changepoint_svg(std::span<const double> series, std::span<const Distribution> changepoints,
                            const std::string& title);

/// Time-frequency heatmap of a log-power surface.
std::string surface_svg(const TVSpectrum& s, const std::string& title);

} // namespace marketstruct
