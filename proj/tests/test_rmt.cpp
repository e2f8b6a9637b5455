#include "marketstruct/rmt.hpp"

#include "oracles.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <catch_amalgamated.hpp>

using namespace marketstruct;

TEST_CASE("Marchenko-Pastur bounds", "[rmt]") {
    const auto unit = mp_bounds(1.0, 1.0);
    CHECK(unit.lambda_minus == 0.0);
    CHECK(unit.lambda_plus == 4.0);

    // Closed form (1 +- sqrt(1/Q))^2 for sigma^2 = 1.
    for (double q : {1.5, 1.95, 2.0, 3.3, 10.0}) {
        const auto b = mp_bounds(q, 1.0);
        CHECK(std::abs(b.lambda_plus - std::pow(1 + std::sqrt(1 / q), 2)) < 1e-12);
        CHECK(std::abs(b.lambda_minus - std::pow(1 - std::sqrt(1 / q), 2)) < 1e-12);
    }
    CHECK(std::abs(mp_bounds(4.0, 2.5).lambda_plus - 2.5 * 2.25) < 1e-12);
    CHECK_THROWS(mp_bounds(0.5, 1.0));
    CHECK_THROWS(mp_bounds(2.0, 0.0));
}

TEST_CASE("Marchenko-Pastur density integrates to one", "[rmt]") {
    boost::math::quadrature::tanh_sinh<double> integrator;
    for (double q : {1.2, 2.0, 3.3, 8.0})
        for (double s2 : {0.7, 1.0, 1.6}) {
            const auto b = mp_bounds(q, s2);
            const double area =
                integrator.integrate([&](double x) { return mp_density(x, b); }, b.lambda_minus, b.lambda_plus);
            CHECK(std::abs(area - 1.0) < 1e-6);
        }
    const auto b = mp_bounds(2.0, 1.0);
    CHECK(mp_density(b.lambda_plus, b) == 0.0);
    CHECK(mp_density(b.lambda_minus, b) == 0.0);
    CHECK(mp_density(b.lambda_plus + 0.1, b) == 0.0);
    CHECK(mp_density(1.0, b) > 0.0);
}

TEST_CASE("eigen spectrum of a 2x2 correlation", "[rmt]") {
    for (double rho : {-0.6, 0.0, 0.3, 0.95}) {
        Matrix c(2, 2);
        c << 1, rho, rho, 1;
        const auto s = eigen_spectrum(c);
        CHECK(std::abs(s.eigenvalues(0) - (1 + std::abs(rho))) < 1e-12);
        CHECK(std::abs(s.eigenvalues(1) - (1 - std::abs(rho))) < 1e-12);
        CHECK(std::abs(s.weights.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("eigenvalues agree with a Jacobi rotation oracle", "[rmt]") {
    const auto panel = oracle::random_panel(120, 12, 31, 0.2);
    const auto c = rolling_correlation(panel, 100, 119);
    const auto s = eigen_spectrum(c);
    const auto ref = oracle::jacobi_eigenvalues(c.values);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(s.eigenvalues(static_cast<Eigen::Index>(i)) - ref[i]) < 1e-9);
    CHECK(std::abs(s.eigenvalues.sum() - 12.0) < 1e-9);
    for (Eigen::Index i = 1; i < s.eigenvalues.size(); ++i) CHECK(s.eigenvalues(i - 1) >= s.eigenvalues(i));
    CHECK(s.eigenvalues.minCoeff() >= -1e-10);
}

TEST_CASE("standardized windows have unit element variance", "[rmt]") {
    const auto panel = oracle::random_panel(200, 7, 4);
    const Matrix z = standardize_window(panel, 150, 180);
    CHECK(std::abs(element_variance(z) - 1.0) < 1e-12);
}

TEST_CASE("a planted common factor is flagged as non-random", "[rmt]") {
    const auto noise = oracle::random_panel(400, 40, 9, 0.0);
    const auto factor = oracle::random_panel(400, 40, 9, 0.5);
    const auto s_noise = time_varying_rmt(noise, 150);
    const auto s_factor = time_varying_rmt(factor, 150);
    REQUIRE(s_noise.size() == 400 - 150 + 1);
    for (std::size_t i = 0; i < s_factor.size(); ++i) {
        CHECK(s_factor.nonrandom_counts[i] >= 1);
        CHECK(s_factor.lambda1_path[i] > s_factor.bounds[i].lambda_plus);
    }
    double mean_noise = 0, mean_factor = 0;
    for (std::size_t i = 0; i < s_noise.size(); ++i) {
        mean_noise += s_noise.lambda1_weight_path[i];
        mean_factor += s_factor.lambda1_weight_path[i];
    }
    CHECK(mean_factor > 3 * mean_noise);
    // Pure noise stays close to the upper edge.
    for (std::size_t i = 0; i < s_noise.size(); ++i) CHECK(s_noise.lambda1_path[i] < 1.3 * s_noise.bounds[i].lambda_plus);
}

TEST_CASE("precomputed matrices give the same series", "[rmt]") {
    const auto panel = oracle::random_panel(90, 6, 12, 0.1);
    const auto mats = rolling_correlation_series(panel, 40);
    std::vector<double> s2;
    for (const auto& m : mats) s2.push_back(element_variance(standardize_window(panel, 40, m.t)));
    const auto a = time_varying_rmt(panel, 40);
    const auto b = time_varying_rmt(mats, s2, 40);
    CHECK(a.times == b.times);
    CHECK(a.nonrandom_counts == b.nonrandom_counts);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.lambda1_path[i] - b.lambda1_path[i]) < 1e-12);
    std::vector<double> short_s2(s2.begin(), s2.end() - 1);
    CHECK_THROWS(time_varying_rmt(mats, short_s2, 40));
}

TEST_CASE("stated upper edges are compared with the formula", "[rmt]") {
    const auto edges = reference_edge_check();
    REQUIRE(edges.size() == 2);
    CHECK(edges[0].q == 3.3);
    CHECK(edges[0].stated_lambda_plus == 1.45);
    CHECK(edges[1].q == 1.95);
    CHECK(edges[1].stated_lambda_plus == 1.75);
    for (const auto& e : edges) {
        CHECK(std::abs(e.formula_lambda_plus - std::pow(1 + std::sqrt(1 / e.q), 2)) < 1e-12);
        CHECK(e.diverges);
    }
    // The formula gives ~2.9451 at Q = 1.95 and ~2.4040 at Q = 3.3.
    CHECK(std::abs(edges[1].formula_lambda_plus - 2.9451) < 1e-4);
    CHECK(std::abs(edges[0].formula_lambda_plus - 2.4040) < 1e-4);
}
