#include "marketstruct/spectra.hpp"

#include "marketstruct/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace marketstruct {

Vector frequency_grid(int k) {
    if (k < 1) throw Error("frequency grid must have at least one point");
    if (k == 1) return Vector::Zero(1);
    return Vector::LinSpaced(k, 0.0, 0.5);
}

MapSpectrumFit map_spectrum_fit(const ChangepointPosterior& posterior, const Chain& chain) {
    const auto m = static_cast<std::size_t>(posterior.map_m);
    if (m < 1) throw Error("posterior has no MAP segment count");
    if (posterior.distributions.size() != m - 1)
        throw Error("posterior lists " + std::to_string(posterior.distributions.size()) +
                    " changepoint distributions for MAP m = " + std::to_string(m));
    if (chain.series_length == 0) throw Error("chain does not record its series length");

    MapSpectrumFit fit;
    fit.series_length = chain.series_length;
    fit.boundaries.push_back(0);
    for (const auto& d : posterior.distributions) {
        if (d.empty()) throw Error("empty changepoint distribution");
        auto best = d.begin();
        for (auto it = d.begin(); it != d.end(); ++it)
            if (it->second > best->second) best = it;
        fit.boundaries.push_back(best->first);
    }
    fit.boundaries.push_back(chain.series_length);
    for (std::size_t j = 0; j + 1 < fit.boundaries.size(); ++j)
        if (fit.boundaries[j] >= fit.boundaries[j + 1])
            throw Error("modal changepoint locations are not strictly increasing inside the series");

    std::size_t used = 0;
    for (const auto& s : chain.samples) {
        if (s.segments() != m) continue;
        if (s.xi.back() != chain.series_length) throw Error("chain sample does not span the series");
        if (fit.beta_mean.empty()) fit.beta_mean.assign(m, Vector::Zero(s.beta.front().size()));
        for (std::size_t j = 0; j < m; ++j) fit.beta_mean[j] += s.beta[j];
        ++used;
    }
    if (used == 0) throw Error("chain has no samples with the posterior's MAP segment count");
    for (auto& b : fit.beta_mean) b /= static_cast<double>(used);
    return fit;
}

TVSpectrum tv_spectrum(const MapSpectrumFit& fit, const Vector& freqs) {
    if (freqs.size() == 0) throw Error("frequency grid is empty");
    if (fit.boundaries.size() != fit.beta_mean.size() + 1 || fit.beta_mean.empty())
        throw Error("segment boundaries do not match the coefficient count");
    if (fit.boundaries.front() != 0 || fit.boundaries.back() != fit.series_length)
        throw Error("segment boundaries must span the whole series");
    TVSpectrum out;
    out.freqs = freqs;
    out.surface.resize(static_cast<Eigen::Index>(fit.series_length), freqs.size());
    for (std::size_t j = 0; j < fit.beta_mean.size(); ++j) {
        const Vector g = log_spectrum(fit.beta_mean[j], freqs);
        for (std::size_t t = fit.boundaries[j]; t < fit.boundaries[j + 1]; ++t)
            out.surface.row(static_cast<Eigen::Index>(t)) = g.transpose();
    }
    if (!out.surface.allFinite()) throw Error("spectrum surface has non-finite values");
    return out;
}

TVSpectrum tv_spectrum(std::span<const double> x, const ChangepointPosterior& posterior, const Chain& chain,
                       int grid) {
    if (x.size() != chain.series_length)
        throw Error("chain was run on a series of length " + std::to_string(chain.series_length) + ", not " +
                    std::to_string(x.size()));
    return tv_spectrum(map_spectrum_fit(posterior, chain), frequency_grid(grid));
}

double spectral_distance(const TVSpectrum& a, const TVSpectrum& b) {
    if (a.surface.rows() != b.surface.rows() || a.surface.cols() != b.surface.cols() || a.freqs != b.freqs)
        throw Error("spectrum surfaces are on different time or frequency grids");
    if (a.surface.size() == 0) throw Error("empty spectrum surface");
    return (a.surface - b.surface).cwiseAbs().sum() / static_cast<double>(a.surface.size());
}

DistanceMatrix spectral_distance_matrix(std::span<const TVSpectrum> surfaces, std::vector<std::string> labels) {
    if (labels.size() != surfaces.size()) throw Error("one label is needed per surface");
    const auto n = surfaces.size();
    DistanceMatrix d{std::move(labels), Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    detail::parallel_for(pairs.size(), [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        const double v = spectral_distance(surfaces[i], surfaces[j]);
        d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        d.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    });
    return d;
}

} // namespace marketstruct
