#include "marketstruct/rmt.hpp"

#include "marketstruct/parallel.hpp"

#include <cmath>
#include <numbers>

namespace marketstruct {

EigenSpectrum eigen_spectrum(const Matrix& correlation) {
    if (correlation.rows() != correlation.cols() || correlation.rows() == 0)
        throw Error("eigen_spectrum needs a non-empty square matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(correlation, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw Error("symmetric eigensolver did not converge");
    EigenSpectrum out;
    out.eigenvalues = solver.eigenvalues().reverse();  // ascending -> descending
    out.weights = out.eigenvalues / out.eigenvalues.sum();
    return out;
}

EigenSpectrum eigen_spectrum(const CorrelationMatrix& m) {
    return eigen_spectrum(m.values);
}

MPBounds mp_bounds(double q, double sigma2) {
    if (!(q >= 1.0)) throw Error("Marchenko-Pastur bounds need Q = S/N >= 1, got " + std::to_string(q));
    if (!(sigma2 > 0.0)) throw Error("Marchenko-Pastur bounds need sigma^2 > 0");
    const double root = 2.0 * std::sqrt(1.0 / q);
    const double lo = sigma2 * (1.0 + 1.0 / q - root);
    return {q, sigma2, std::max(0.0, lo), sigma2 * (1.0 + 1.0 / q + root)};
}

double mp_density(double x, const MPBounds& b) {
    if (x <= b.lambda_minus || x >= b.lambda_plus || x <= 0.0) return 0.0;
    return b.q / (2.0 * std::numbers::pi * b.sigma2 * x) * std::sqrt((b.lambda_plus - x) * (x - b.lambda_minus));
}

int count_nonrandom(const EigenSpectrum& spectrum, const MPBounds& b) {
    return static_cast<int>((spectrum.eigenvalues.array() > b.lambda_plus).count());
}

double element_variance(const Matrix& standardized) {
    const double n = static_cast<double>(standardized.size());
    const double mean = standardized.mean();
    return (standardized.array() - mean).square().sum() / n;
}

namespace {

EigenSpectrumSeries assemble(std::size_t count, std::size_t window, std::size_t n_assets, auto&& per_window) {
    EigenSpectrumSeries out;
    out.times.resize(count);
    out.lambda1_path.resize(count);
    out.lambda1_weight_path.resize(count);
    out.nonrandom_counts.resize(count);
    out.bounds.resize(count);
    const double q = static_cast<double>(window) / static_cast<double>(n_assets);
    detail::parallel_for(count, [&](std::size_t i) {
        const auto [t, corr, sigma2] = per_window(i);
        const auto spectrum = eigen_spectrum(corr);
        const auto b = mp_bounds(q, sigma2);
        out.times[i] = t;
        out.lambda1_path[i] = spectrum.eigenvalues(0);
        out.lambda1_weight_path[i] = spectrum.weights(0);
        out.nonrandom_counts[i] = count_nonrandom(spectrum, b);
        out.bounds[i] = b;
    });
    return out;
}

} // namespace

EigenSpectrumSeries time_varying_rmt(const ReturnsPanel& returns, std::size_t window) {
    RollingCorrelationSeries view(returns, window);
    return assemble(view.size(), window, returns.cols(), [&](std::size_t i) {
        const std::size_t t = view.first_t() + i;
        const Matrix z = standardize_window(returns, window, t);
        return std::tuple{t, gram_correlation(z), element_variance(z)};
    });
}

EigenSpectrumSeries time_varying_rmt(std::span<const CorrelationMatrix> mats, std::span<const double> sigma2,
                                     std::size_t window) {
    if (mats.size() != sigma2.size()) throw Error("one element variance is needed per correlation matrix");
    if (mats.empty()) return {};
    const auto n = mats.front().tickers.size();
    for (const auto& m : mats)
        if (m.tickers.size() != n) throw Error("correlation matrices must share the asset count");
    return assemble(mats.size(), window, n,
                    [&](std::size_t i) { return std::tuple{mats[i].t, mats[i].values, sigma2[i]}; });
}

std::vector<ReferenceEdge> reference_edge_check(double sigma2, double tolerance) {
    constexpr std::pair<double, double> stated[] = {{3.3, 1.45}, {1.95, 1.75}};
    std::vector<ReferenceEdge> out;
    for (const auto& [q, lp] : stated) {
        const double formula = mp_bounds(q, sigma2).lambda_plus;
        out.push_back({q, lp, formula, std::abs(formula - lp) > tolerance});
    }
    return out;
}

} // namespace marketstruct
