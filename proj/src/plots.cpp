#include "marketstruct/plots.hpp"

#include "marketstruct/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace marketstruct {

namespace {

constexpr double kWidth = 800, kHeight = 480, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Axes {
    double x0, x1, y0, y1;
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Axes make_axes(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    return {x0, x1, y0, y1};
}

std::string header(const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + "<text x=\"" + num(kWidth / 2) +
           "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) + "</text>\n";
}

std::string frame(const Axes& a, const std::string& x_label, const std::string& y_label) {
    std::string s = "<g stroke=\"black\" fill=\"none\"><rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" +
                    num(kWidth - kLeft - kRight) + "\" height=\"" + num(kHeight - kTop - kBottom) + "\"/></g>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = a.x0 + (a.x1 - a.x0) * i / 4.0;
        const double yv = a.y0 + (a.y1 - a.y0) * i / 4.0;
        s += "<text x=\"" + num(a.px(xv)) + "\" y=\"" + num(kHeight - kBottom + 16) + "\" text-anchor=\"middle\">" +
             format_double(std::round(xv * 1000) / 1000) + "</text>\n";
        s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(a.py(yv) + 4) + "\" text-anchor=\"end\">" +
             format_double(std::round(yv * 1000) / 1000) + "</text>\n";
    }
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(x_label) + "</text>\n";
    s += "<text transform=\"translate(16," + num(kHeight / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(y_label) + "</text>\n";
    return s;
}

std::string polyline(const Axes& a, std::span<const double> x, std::span<const double> y, const std::string& colour,
                     double width = 1.2) {
    std::string s = "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"" + num(width) + "\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) s += num(a.px(x[i])) + "," + num(a.py(y[i])) + " ";
    return s + "\"/>\n";
}

} // namespace

DensityPlotData density_plot_data(const Vector& eigenvalues, const MPBounds& bounds, int bins, int curve_points) {
    if (eigenvalues.size() == 0) throw Error("no eigenvalues to plot");
    if (bins < 1 || curve_points < 2) throw Error("plot needs at least one bin and two curve points");
    DensityPlotData d;
    d.x_max = std::max(eigenvalues.maxCoeff(), bounds.lambda_plus) * 1.1;
    const double width = (d.x_max - d.x_min) / bins;
    d.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) d.bin_edges[static_cast<std::size_t>(i)] = d.x_min + width * i;
    d.bin_heights.assign(static_cast<std::size_t>(bins), 0.0);
    for (double v : eigenvalues) {
        auto i = static_cast<int>(std::floor((std::max(v, 0.0) - d.x_min) / width));
        i = std::clamp(i, 0, bins - 1);
        d.bin_heights[static_cast<std::size_t>(i)] += 1.0;
    }
    for (double& h : d.bin_heights) h /= static_cast<double>(eigenvalues.size()) * width;
    for (int i = 0; i < curve_points; ++i) {
        const double x = d.x_min + (d.x_max - d.x_min) * i / (curve_points - 1);
        d.curve_x.push_back(x);
        d.curve_y.push_back(mp_density(x, bounds));
    }
    return d;
}

std::string density_svg(const DensityPlotData& d, const std::string& title) {
    double top = 0.0;
    for (double h : d.bin_heights) top = std::max(top, h);
    for (double y : d.curve_y) top = std::max(top, y);
    const Axes a = make_axes(d.x_min, d.x_max, 0.0, top * 1.05);
    std::string s = header(title) + frame(a, "eigenvalue", "density");
    s += "<g fill=\"#9ecae1\" stroke=\"#3182bd\">\n";
    for (std::size_t i = 0; i < d.bin_heights.size(); ++i) {
        if (d.bin_heights[i] == 0.0) continue;
        const double x0 = a.px(d.bin_edges[i]), x1 = a.px(d.bin_edges[i + 1]), y = a.py(d.bin_heights[i]);
        s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
             num(a.py(0.0) - y) + "\"/>\n";
    }
    s += "</g>\n" + polyline(a, d.curve_x, d.curve_y, "#d62728", 2.0) + "</svg>\n";
    return s;
}

std::string lines_svg(std::span<const Line> lines, const std::string& title, const std::string& y_label) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& l : lines) {
        for (double v : l.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
        for (double v : l.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    const double pad = (y1 - y0) * 0.05;
    const Axes a = make_axes(x0, x1, y0 - pad, y1 + pad);
    std::string s = header(title) + frame(a, "t", y_label);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string colour = kPalette[i % std::size(kPalette)];
        s += polyline(a, lines[i].x, lines[i].y, colour);
        s += "<text x=\"" + num(kWidth - kRight - 4) + "\" y=\"" + num(kTop + 14 + 14.0 * static_cast<double>(i)) +
             "\" text-anchor=\"end\" fill=\"" + colour + "\">" + escape(lines[i].name) + "</text>\n";
    }
    return s + "</svg>\n";
}

std::string dendrogram_svg(const Dendrogram& d, const std::string& title) {
    const std::size_t n = d.labels.size();
    if (n == 0) throw Error("empty dendrogram");
    const auto order = d.leaf_order();
    std::vector<double> x(n + d.merges.size()), y(n + d.merges.size(), 0.0);
    for (std::size_t i = 0; i < order.size(); ++i) x[order[i]] = static_cast<double>(i);
    double top = 0.0;
    for (std::size_t k = 0; k < d.merges.size(); ++k) {
        x[n + k] = 0.5 * (x[d.merges[k].a] + x[d.merges[k].b]);
        y[n + k] = d.merges[k].height;
        top = std::max(top, d.merges[k].height);
    }
    const Axes a = make_axes(-0.5, static_cast<double>(n) - 0.5, 0.0, top > 0 ? top * 1.05 : 1.0);
    std::string s = header(title);
    s += "<text transform=\"translate(16," + num(kHeight / 2) + ") rotate(-90)\" text-anchor=\"middle\">height</text>\n";
    s += "<g stroke=\"black\" fill=\"none\">\n";
    for (std::size_t k = 0; k < d.merges.size(); ++k) {
        const auto& m = d.merges[k];
        const double h = a.py(m.height);
        s += "<polyline points=\"" + num(a.px(x[m.a])) + "," + num(a.py(y[m.a])) + " " + num(a.px(x[m.a])) + "," + num(h) +
             " " + num(a.px(x[m.b])) + "," + num(h) + " " + num(a.px(x[m.b])) + "," + num(a.py(y[m.b])) + "\"/>\n";
    }
    s += "</g>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = a.y0 + (a.y1 - a.y0) * i / 4.0;
        s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(a.py(v) + 4) + "\" text-anchor=\"end\">" +
             format_double(std::round(v * 1000) / 1000) + "</text>\n";
    }
    for (std::size_t i = 0; i < order.size(); ++i)
        s += "<text transform=\"translate(" + num(a.px(static_cast<double>(i))) + "," + num(kHeight - kBottom + 12) +
             ") rotate(30)\">" + escape(d.labels[order[i]]) + "</text>\n";
    return s + "</svg>\n";
}

std::string changepoint_svg(std::span<const double> series, std::span<const Distribution> changepoints,
                            const std::string& title) {
    if (series.empty()) throw Error("empty series");
    std::vector<double> xs(series.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    const Axes a = make_axes(0.0, static_cast<double>(series.size() - 1), *lo, *hi);
    std::string s = header(title) + frame(a, "t", "return");
    for (std::size_t j = 0; j < changepoints.size(); ++j) {
        double peak = 0.0;
        for (const auto& [t, p] : changepoints[j]) peak = std::max(peak, p);
        const std::string colour = kPalette[(j + 1) % std::size(kPalette)];
        for (const auto& [t, p] : changepoints[j]) {
            const double x = a.px(static_cast<double>(t));
            s += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(x) + "\" y2=\"" +
                 num(kHeight - kBottom) + "\" stroke=\"" + colour + "\" stroke-width=\"2\" stroke-opacity=\"" +
                 num(peak > 0 ? p / peak : 0.0) + "\"/>\n";
        }
    }
    s += polyline(a, xs, series, "#333333", 0.8);
    return s + "</svg>\n";
}

std::string surface_svg(const TVSpectrum& sp, const std::string& title) {
    if (sp.surface.size() == 0) throw Error("empty spectrum surface");
    const double lo = sp.surface.minCoeff(), hi = sp.surface.maxCoeff();
    const Axes a = make_axes(0.0, static_cast<double>(sp.surface.rows()), sp.freqs(0), sp.freqs(sp.freqs.size() - 1));
    std::string s = header(title) + frame(a, "t", "frequency (cycles per observation)");
    const Eigen::Index rows = sp.surface.rows(), cols = sp.surface.cols();
    const Eigen::Index step = std::max<Eigen::Index>(1, rows / 200);
    const double cell_h = (kHeight - kTop - kBottom) / static_cast<double>(cols);
    s += "<g stroke=\"none\">\n";
    for (Eigen::Index t = 0; t < rows; t += step) {
        const Eigen::Index t_end = std::min(rows, t + step);
        const double x0 = a.px(static_cast<double>(t)), x1 = a.px(static_cast<double>(t_end));
        for (Eigen::Index k = 0; k < cols; ++k) {
            const double v = hi > lo ? (sp.surface(t, k) - lo) / (hi - lo) : 0.5;
            const int r = static_cast<int>(std::lround(255 * v));
            const int b = 255 - r;
            char colour[8];
            std::snprintf(colour, sizeof colour, "#%02x40%02x", r, b);
            const double y = kHeight - kBottom - cell_h * static_cast<double>(k + 1);
            s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
                 num(cell_h) + "\" fill=\"" + colour + "\"/>\n";
        }
    }
    s += "</g>\n<text x=\"" + num(kWidth - kRight) + "\" y=\"" + num(kTop - 6) + "\" text-anchor=\"end\">log power " +
         format_double(std::round(lo * 100) / 100) + " (blue) to " + format_double(std::round(hi * 100) / 100) +
         " (red)</text>\n";
    return s + "</svg>\n";
}

} // namespace marketstruct
