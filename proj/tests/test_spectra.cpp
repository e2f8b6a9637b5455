#include "marketstruct/sectors.hpp"
#include "marketstruct/spectra.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace marketstruct;

namespace {

std::vector<double> ar1(std::size_t n, double phi, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n01(0, 1);
    std::vector<double> x(n);
    double prev = 0;
    for (int burn = 0; burn < 100; ++burn) prev = phi * prev + n01(rng);
    for (auto& v : x) v = scale * (prev = phi * prev + n01(rng));
    return x;
}

TVSpectrum random_surface(Eigen::Index T, Eigen::Index K, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0, 1);
    TVSpectrum s;
    s.freqs = frequency_grid(static_cast<int>(K));
    s.surface.resize(T, K);
    for (Eigen::Index i = 0; i < s.surface.size(); ++i) s.surface.data()[i] = n01(rng);
    return s;
}

MapSpectrumFit two_segment_fit() {
    MapSpectrumFit fit;
    fit.series_length = 100;
    fit.boundaries = {0, 37, 100};
    fit.beta_mean = {Vector::Zero(4), Vector::Zero(4)};
    fit.beta_mean[0] << 1.0, 0.5, -0.2, 0.1;
    fit.beta_mean[1] << -0.5, -0.3, 0.0, 0.4;
    return fit;
}

struct FittedSeries {
    ChangepointPosterior posterior;
    Chain chain;
};

FittedSeries fit(const std::vector<double>& x, std::uint64_t seed) {
    RJMCMCConfig cfg;
    cfg.iterations = 2000;
    cfg.burnin = 1000;
    cfg.seed = seed;
    FittedSeries out;
    out.chain = run_rjmcmc(x, cfg);
    out.posterior = extract_posterior(out.chain, cfg);
    return out;
}

} // namespace

TEST_CASE("frequency grid", "[spectra]") {
    const auto g = frequency_grid(64);
    CHECK(g.size() == 64);
    CHECK(g(0) == 0.0);
    CHECK(g(63) == 0.5);
    CHECK(std::abs(g(1) - 0.5 / 63) < 1e-15);
    CHECK(frequency_grid(1).size() == 1);
    CHECK_THROWS(frequency_grid(0));
}

TEST_CASE("surface rows change only at segment boundaries", "[spectra]") {
    const auto f = two_segment_fit();
    const auto s = tv_spectrum(f, frequency_grid(16));
    REQUIRE(s.length() == 100);
    REQUIRE(s.surface.cols() == 16);
    CHECK(s.surface.allFinite());
    for (Eigen::Index t = 1; t < 100; ++t) {
        const bool changed = (s.surface.row(t) - s.surface.row(t - 1)).cwiseAbs().maxCoeff() > 0;
        CHECK(changed == (t == 37));
    }
    CHECK((s.surface.row(0).transpose() - log_spectrum(f.beta_mean[0], s.freqs)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((s.surface.row(99).transpose() - log_spectrum(f.beta_mean[1], s.freqs)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("shifting the intercept by 2 log c shifts the surface uniformly", "[spectra][property]") {
    const double c = 3.7;
    auto f = two_segment_fit();
    const auto base = tv_spectrum(f, frequency_grid(32));
    for (auto& b : f.beta_mean) b(0) += 2 * std::log(c);
    const auto scaled = tv_spectrum(f, frequency_grid(32));
    CHECK(((scaled.surface - base.surface).array() - 2 * std::log(c)).abs().maxCoeff() < 1e-12);

    // The Whittle score of a series scaled by c under the shifted coefficients differs from
    // the original by a constant, so the fitted surface moves by exactly 2 log c.
    std::mt19937_64 rng(6);
    auto x = ar1(120, 0.5, rng);
    auto y = x;
    for (auto& v : y) v *= c;
    const auto px = demeaned_periodogram(x), py = demeaned_periodogram(y);
    CHECK((py.power - c * c * px.power).cwiseAbs().maxCoeff() < 1e-10 * py.power.maxCoeff());
    Vector beta = Vector::Zero(11);
    beta(1) = 0.4;
    Vector shifted = beta;
    shifted(0) += 2 * std::log(c);
    CHECK(std::abs(whittle_loglik(py, shifted) - (whittle_loglik(px, beta) - static_cast<double>(px.bins()) * 2 * std::log(c))) < 1e-9);

    // Distances between commonly scaled surfaces are unchanged.
    auto a = random_surface(50, 16, 1), b = random_surface(50, 16, 2);
    const double d = spectral_distance(a, b);
    a.surface.array() += 2 * std::log(c);
    b.surface.array() += 2 * std::log(c);
    CHECK(std::abs(spectral_distance(a, b) - d) < 1e-12);
}

TEST_CASE("spectral distance", "[spectra]") {
    const auto a = random_surface(50, 16, 3);
    CHECK(spectral_distance(a, a) == 0.0);
    auto shifted = a;
    shifted.surface.array() += 0.5;
    CHECK(std::abs(spectral_distance(a, shifted) - 0.5) < 1e-12);

    const auto b = random_surface(50, 16, 4);
    double oracle = 0;
    for (Eigen::Index t = 0; t < 50; ++t)
        for (Eigen::Index k = 0; k < 16; ++k) oracle += std::abs(a.surface(t, k) - b.surface(t, k));
    oracle /= 50.0 * 16.0;
    CHECK(std::abs(spectral_distance(a, b) - oracle) < 1e-12);

    CHECK_THROWS(spectral_distance(a, random_surface(49, 16, 5)));
    CHECK_THROWS(spectral_distance(a, random_surface(50, 15, 5)));
}

TEST_CASE("spectral distance is a pseudometric", "[spectra][property]") {
    for (std::uint64_t seed = 10; seed < 30; seed += 3) {
        std::vector<TVSpectrum> s{random_surface(30, 8, seed), random_surface(30, 8, seed + 1), random_surface(30, 8, seed + 2)};
        const auto d = spectral_distance_matrix(s, {"x", "y", "z"});
        for (Eigen::Index i = 0; i < 3; ++i) {
            CHECK(d.values(i, i) == 0.0);
            for (Eigen::Index j = 0; j < 3; ++j) {
                CHECK(d.values(i, j) == d.values(j, i));
                CHECK(d.values(i, j) >= 0.0);
                for (Eigen::Index k = 0; k < 3; ++k) CHECK(d.values(i, k) <= d.values(i, j) + d.values(j, k) + 1e-10);
            }
        }
    }
    std::vector<TVSpectrum> one{random_surface(10, 4, 1)};
    const auto single = spectral_distance_matrix(one, {"only"});
    CHECK(single.values.rows() == 1);
    CHECK(single.values(0, 0) == 0.0);
    CHECK_THROWS(spectral_distance_matrix(one, {"a", "b"}));
}

TEST_CASE("MAP fit from a hand-built chain", "[spectra]") {
    Chain chain;
    chain.series_length = 200;
    auto sample = [](std::size_t cp, double level) {
        SegmentModel m;
        m.xi = {0, cp, 200};
        m.beta = {Vector::Constant(3, level), Vector::Constant(3, -level)};
        m.tau2 = {1.0, 1.0};
        return m;
    };
    chain.samples = {sample(90, 1.0), sample(100, 2.0), sample(100, 3.0)};
    SegmentModel single;
    single.xi = {0, 200};
    single.beta = {Vector::Constant(3, 50.0)};
    single.tau2 = {1.0};
    chain.samples.push_back(single);
    RJMCMCConfig cfg;
    const auto post = extract_posterior(chain, cfg);
    const auto fit = map_spectrum_fit(post, chain);
    CHECK(fit.boundaries == std::vector<std::size_t>{0, 100, 200});
    CHECK(fit.beta_mean[0].isApprox(Vector::Constant(3, 2.0)));
    CHECK(fit.beta_mean[1].isApprox(Vector::Constant(3, -2.0)));

    std::vector<double> wrong_length(150, 0.0);
    CHECK_THROWS(tv_spectrum(wrong_length, post, chain, 8));
    std::vector<double> right_length(200, 0.0);
    CHECK(tv_spectrum(right_length, post, chain, 8).length() == 200);
}

TEST_CASE("white noise gives a flat constant surface", "[spectra][slow]") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        std::mt19937_64 rng(2024 + seed);
        const auto x = ar1(1000, 0.0, rng);
        const auto f = fit(x, 5 + seed);
        REQUIRE(f.posterior.map_m == 1);
        const auto s = tv_spectrum(x, f.posterior, f.chain);
        CHECK(s.surface.cols() == 64);
        for (Eigen::Index t = 1; t < s.surface.rows(); ++t) CHECK(s.surface.row(t) == s.surface.row(0));
        // Unit-variance white noise has log-power 0 at every frequency; the basis is
        // least constrained at the grid ends, so flatness is measured as RMS deviation.
        const double rms = std::sqrt(s.surface.row(0).squaredNorm() / 64.0);
        CHECK(rms < 0.3);
        CHECK(std::abs(s.surface.row(0).mean()) < 0.15);
    }
}

TEST_CASE("an AR(1) segment with positive coefficient has decreasing log-power", "[spectra][slow]") {
    std::mt19937_64 rng(77);
    const auto x = ar1(600, 0.9, rng);
    const auto f = fit(x, 6);
    const auto s = tv_spectrum(x, f.posterior, f.chain, 32);
    const Vector row = s.surface.row(0).transpose();
    Eigen::Index argmax = 0;
    row.maxCoeff(&argmax);
    CHECK(argmax == 0);
    CHECK(row(0) - row(31) > 3.0);
    // Smooth basis: allow small ripples, but the trend over quarter-bands falls.
    for (Eigen::Index k = 8; k < 32; k += 8) CHECK(row(k) < row(k - 8));
}

TEST_CASE("two identical regimes merge before a distinct one", "[spectra][slow]") {
    std::vector<TVSpectrum> surfaces;
    std::mt19937_64 rng(8);
    const std::vector<double> phis{0.7, 0.7, -0.7};
    for (std::size_t i = 0; i < phis.size(); ++i) {
        const auto x = ar1(500, phis[i], rng);
        const auto f = fit(x, 10 + i);
        surfaces.push_back(tv_spectrum(x, f.posterior, f.chain, 32));
    }
    const auto d = spectral_distance_matrix(surfaces, {"a", "b", "c"});
    const auto dg = agglomerative_cluster(d);
    CHECK(dg.merges[0].a == 0);
    CHECK(dg.merges[0].b == 1);
}
