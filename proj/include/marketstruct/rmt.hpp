/**
 * @file rmt.hpp
 * @brief Correlation eigenspectra against the Marchenko-Pastur null.
 *
 * For an S x N panel of i.i.d. standardised returns the correlation
 * eigenvalues follow, as N, S grow with Q = S/N fixed, the density
 *
 *     p(x) = Q / (2 pi sigma^2 x) * sqrt((lambda_+ - x)(x - lambda_-))
 *
 * on [lambda_-, lambda_+] with
 *
 *     lambda_{+-} = sigma^2 (1 + 1/Q +- 2 sqrt(1/Q)).
 *
 * Eigenvalues strictly above lambda_+ are counted as non-random.
 */
#pragma once

#include "marketstruct/rollcorr.hpp"

namespace marketstruct {

struct EigenSpectrum {
    Vector eigenvalues;  // descending
    Vector weights;      // eigenvalues / sum(eigenvalues)
};

struct MPBounds {
    double q = 1.0;
    double sigma2 = 1.0;
    double lambda_minus = 0.0;
    double lambda_plus = 4.0;
};

struct EigenSpectrumSeries {
    std::vector<std::size_t> times;
    std::vector<double> lambda1_path;         // raw dominant eigenvalue
    std::vector<double> lambda1_weight_path;  // explanatory variance of the dominant eigenvalue
    std::vector<int> nonrandom_counts;
    std::vector<MPBounds> bounds;

    std::size_t size() const noexcept { return times.size(); }
};

EigenSpectrum eigen_spectrum(const Matrix& correlation);
EigenSpectrum eigen_spectrum(const CorrelationMatrix& m);

MPBounds mp_bounds(double q, double sigma2);

/// Zero outside the open support and at its endpoints.
double mp_density(double x, const MPBounds& b);

int count_nonrandom(const EigenSpectrum& spectrum, const MPBounds& b);

/// Variance of all entries of a standardised window.
double element_variance(const Matrix& standardized);

/// Rolling RMT summary over every window of the panel; sigma^2 is recomputed per window.
EigenSpectrumSeries time_varying_rmt(const ReturnsPanel& returns, std::size_t window);

/// Same summary from precomputed matrices and their per-window element variances.
EigenSpectrumSeries time_varying_rmt(std::span<const CorrelationMatrix> mats, std::span<const double> sigma2,
                                     std::size_t window);

/// Reference upper-edge values quoted for Q = 3.3 and Q = 1.95 at S = 150,
/// compared against the formula evaluated at sigma^2.
struct ReferenceEdge {
    double q = 0.0;
    double stated_lambda_plus = 0.0;
    double formula_lambda_plus = 0.0;
    bool diverges = false;
};

std::vector<ReferenceEdge> reference_edge_check(double sigma2 = 1.0, double tolerance = 1e-2);

} // namespace marketstruct
