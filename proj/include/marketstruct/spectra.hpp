#pragma once

#include "marketstruct/changepoint.hpp"

namespace marketstruct {

/// Time-frequency log-power surface; row t is the log-spectrum in force at time t.
struct TVSpectrum {
    Vector freqs;    // cycles per observation, within [0, 0.5]
    Matrix surface;  // T x K_f

    std::size_t length() const noexcept { return static_cast<std::size_t>(surface.rows()); }
};

/// K uniform points on [0, 0.5], endpoints included.
Vector frequency_grid(int k);

/// Segment boundaries and posterior-mean coefficients of the MAP segment model.
struct MapSpectrumFit {
    std::size_t series_length = 0;
    std::vector<std::size_t> boundaries;  // 0 = b_0 < b_1 < ... < b_m = T
    std::vector<Vector> beta_mean;        // one per segment
};

/// Boundaries at the modal changepoint locations, coefficients averaged over the
/// post-burn-in samples with the MAP segment count.
MapSpectrumFit map_spectrum_fit(const ChangepointPosterior& posterior, const Chain& chain);

TVSpectrum tv_spectrum(const MapSpectrumFit& fit, const Vector& freqs);
TVSpectrum tv_spectrum(std::span<const double> x, const ChangepointPosterior& posterior, const Chain& chain,
                       int grid = 64);

/// Mean absolute difference over the common time-frequency grid.
double spectral_distance(const TVSpectrum& a, const TVSpectrum& b);

DistanceMatrix spectral_distance_matrix(std::span<const TVSpectrum> surfaces, std::vector<std::string> labels);

} // namespace marketstruct
