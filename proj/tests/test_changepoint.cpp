#include "marketstruct/changepoint.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace marketstruct;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0, 1);
    std::vector<double> x(n);
    for (auto& v : x) v = scale * n01(rng);
    return x;
}

std::vector<double> ar_switch(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0, 1);
    std::vector<double> x(n);
    double prev = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double phi = t < n / 2 ? 0.9 : -0.9;
        prev = phi * prev + n01(rng);
        x[t] = prev;
    }
    return x;
}

Vector random_beta(int n_basis, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0, 0.3);
    Vector b(n_basis + 1);
    for (auto& v : b) v = n01(rng);
    return b;
}

} // namespace

TEST_CASE("periodogram matches a direct DFT", "[changepoint]") {
    for (std::size_t n : {4u, 7u, 40u, 101u, 256u}) {
        const auto x = white_noise(n, n);
        const auto p = periodogram(x);
        const auto ref = oracle::dft_periodogram(x);
        REQUIRE(static_cast<std::size_t>(p.bins()) == ref.size());
        for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(p.power(static_cast<Eigen::Index>(k)) - ref[k]) < 1e-10);
        const auto f = p.frequencies();
        CHECK(f(0) == Catch::Approx(1.0 / static_cast<double>(n)));
        CHECK(f(f.size() - 1) < 0.5);
    }
    CHECK_THROWS(periodogram(std::vector<double>{1, 2, 3}));
}

TEST_CASE("demeaned periodogram satisfies Parseval for odd lengths", "[changepoint]") {
    for (std::size_t n : {41u, 99u, 301u}) {
        auto x = white_noise(n, 3 * n, 2.0);
        for (auto& v : x) v += 5.0;
        const auto p = demeaned_periodogram(x);
        double mean = 0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n);
        double ss = 0;
        for (double v : x) ss += (v - mean) * (v - mean);
        CHECK(std::abs(2 * p.power.sum() - ss) < 1e-9 * ss);
        CHECK(std::abs(periodogram(x).power.sum() - p.power.sum()) < 1e-9 * ss);
    }
}

TEST_CASE("log spectrum agrees with the basis matrix", "[changepoint]") {
    const auto X = spectral_basis(64, 5);
    const Vector beta = random_beta(5, 1);
    Vector freqs(X.rows());
    for (Eigen::Index k = 0; k < freqs.size(); ++k) freqs(k) = static_cast<double>(k + 1) / 64.0;
    CHECK(((X * beta) - log_spectrum(beta, freqs)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(X.col(0).isOnes(0.0));
    CHECK(std::abs(X(0, 1) - std::sqrt(2.0) * std::cos(2 * std::numbers::pi / 64.0)) < 1e-15);
}

TEST_CASE("Whittle derivatives match finite differences", "[changepoint]") {
    const auto x = white_noise(120, 8);
    const auto p = demeaned_periodogram(x);
    const Vector beta = random_beta(6, 2);
    const auto d = whittle_derivatives(p, beta);
    CHECK(std::abs(d.value - whittle_loglik(p, beta)) < 1e-12 * std::abs(d.value));
    CHECK(std::abs(d.value - segment_loglik(x, beta)) < 1e-12 * std::abs(d.value));

    // direct sum over bins
    double direct = 0;
    const auto g = log_spectrum(beta, p.frequencies());
    for (Eigen::Index k = 0; k < g.size(); ++k) direct -= g(k) + p.power(k) * std::exp(-g(k));
    CHECK(std::abs(direct - d.value) < 1e-10 * std::abs(direct));

    const double h = 1e-5;
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        Vector up = beta, dn = beta;
        up(i) += h;
        dn(i) -= h;
        const double fd = (whittle_loglik(p, up) - whittle_loglik(p, dn)) / (2 * h);
        CHECK(std::abs(fd - d.gradient(i)) < 1e-5 * std::max(1.0, std::abs(fd)));
        const Vector gfd = (whittle_derivatives(p, up).gradient - whittle_derivatives(p, dn).gradient) / (2 * h);
        CHECK((gfd - d.hessian.col(i)).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, gfd.cwiseAbs().maxCoeff()));
    }
    CHECK((d.hessian - d.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Newton mode is a stationary point with a consistent Gaussian approximation", "[changepoint]") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto x = ar_switch(200, seed);
        const auto p = demeaned_periodogram(std::span(x).first(100));
        const double tau2 = 0.5 + static_cast<double>(seed);
        const auto a = beta_mode_and_hessian(p, tau2, 100.0, 10);
        const auto d = whittle_derivatives(p, a.mode);
        Vector prior(11);
        prior.setConstant(1.0 / tau2);
        prior(0) = 1.0 / 100.0;
        const Vector grad = d.gradient - prior.cwiseProduct(a.mode);
        CHECK(grad.norm() < 1e-6);
        const Matrix precision = -d.hessian + Matrix(prior.asDiagonal());
        CHECK((precision - a.precision).cwiseAbs().maxCoeff() < 1e-8 * precision.cwiseAbs().maxCoeff());
        CHECK((a.precision * a.covariance - Matrix::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(a.log_det_precision - std::log(precision.determinant())) < 1e-8);
        // Mode is the density peak.
        Vector off = a.mode;
        off(2) += 0.05;
        CHECK(log_gaussian_density(a.mode, a) > log_gaussian_density(off, a));
        // AR(0.9) has most power at low frequency, so the first cosine weight is positive.
        CHECK(a.mode(1) > 0.0);
    }
}

TEST_CASE("Gaussian and prior log densities", "[changepoint]") {
    BetaApproximation a;
    a.mode = Vector::Zero(2);
    a.precision = Matrix::Identity(2, 2) * 4.0;
    a.precision_chol_lower = Matrix::Identity(2, 2) * 2.0;
    a.log_det_precision = std::log(16.0);
    Vector b(2);
    b << 0.5, -0.5;
    const double expected = -std::log(2 * std::numbers::pi) + 0.5 * std::log(16.0) - 0.5 * 4.0 * 0.5;
    CHECK(std::abs(log_gaussian_density(b, a) - expected) < 1e-12);

    const double lp = log_beta_prior(b, 2.0, 9.0);
    const double ref = -0.5 * std::log(2 * std::numbers::pi * 9.0) - 0.125 / 9.0 - 0.5 * std::log(2 * std::numbers::pi * 2.0) - 0.125 / 2.0;
    CHECK(std::abs(lp - ref) < 1e-12);

    CHECK(std::abs(log_inverse_gamma(2.0, 3.0, 1.5) - (3 * std::log(1.5) - std::lgamma(3.0) - 4 * std::log(2.0) - 0.75)) < 1e-12);
    CHECK(log_inverse_gamma(0.0, 1.0, 1.0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("partition prior is uniform over admissible compositions", "[changepoint]") {
    for (std::size_t T : {20u, 27u})
        for (std::size_t t_min : {4u, 5u})
            for (std::size_t m = 1; m <= 4; ++m) {
                // brute force count of compositions of T into m parts >= t_min
                std::function<double(std::size_t, std::size_t)> count = [&](std::size_t rest, std::size_t parts) -> double {
                    if (parts == 1) return rest >= t_min ? 1.0 : 0.0;
                    double c = 0;
                    for (std::size_t first = t_min; first + t_min * (parts - 1) <= rest; ++first) c += count(rest - first, parts - 1);
                    return c;
                };
                const double n = count(T, m);
                if (n == 0) CHECK(log_partition_prior(T, m, t_min) == -std::numeric_limits<double>::infinity());
                else CHECK(std::abs(log_partition_prior(T, m, t_min) + std::log(n)) < 1e-10);
            }
}

TEST_CASE("between-model move probabilities", "[changepoint]") {
    CHECK(between_model_probabilities(1, 1, 10).birth == 1.0);
    CHECK(between_model_probabilities(1, 0, 10).birth == 0.0);
    CHECK(between_model_probabilities(1, 0, 10).death == 0.0);
    CHECK(between_model_probabilities(10, 3, 10).death == 1.0);
    CHECK(between_model_probabilities(3, 0, 10).death == 1.0);
    const auto mid = between_model_probabilities(3, 2, 10);
    CHECK(mid.birth + mid.death == 1.0);
}

TEST_CASE("relocation proposal is a normalised mixture", "[changepoint][property]") {
    for (double pi : {0.0, 0.3, 0.8, 1.0})
        for (auto [prev, cur, next] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{
                 {0, 40, 200}, {0, 100, 200}, {0, 160, 200}, {50, 90, 130}, {10, 60, 140}}) {
            const auto pmf = relocation_proposal(prev, cur, next, 40, pi);
            double total = 0;
            for (const auto& [t, p] : pmf) {
                CHECK(t >= prev + 40);
                CHECK(t + 40 <= next);
                CHECK(p >= 0.0);
                total += p;
            }
            CHECK(std::abs(total - 1.0) < 1e-12);
            if (pi == 0.0) {
                std::vector<std::size_t> support;
                for (const auto& [t, p] : pmf)
                    if (p > 0.0) support.push_back(t);
                CHECK(support.back() - support.front() <= 2);
            }
        }
    CHECK_THROWS(relocation_proposal(0, 30, 200, 40, 0.8));
}

TEST_CASE("configuration validation", "[changepoint]") {
    RJMCMCConfig cfg;
    CHECK_NOTHROW(cfg.validate(1000));
    CHECK_THROWS(cfg.validate(79));
    cfg.burnin = cfg.iterations;
    CHECK_THROWS(cfg.validate(1000));
    cfg = {};
    cfg.t_min = 15;
    CHECK_THROWS(cfg.validate(1000));
    cfg = {};
    cfg.mix_pi = 1.5;
    CHECK_THROWS(cfg.validate(1000));
    CHECK_THROWS(SpectralSampler(std::vector<double>(50, 0.0), RJMCMCConfig{}));
}

TEST_CASE("birth and death acceptance ratios are reciprocal", "[changepoint][property]") {
    const auto x = ar_switch(400, 12);
    RJMCMCConfig cfg;
    cfg.seed = 4;
    SpectralSampler sampler(x, cfg);
    auto state = sampler.initial_state();
    for (const auto& [split, u] : std::vector<std::pair<std::size_t, double>>{{200, 0.5}, {57, 0.2}, {333, 0.91}}) {
        SplitChoice c{0, split, u};
        const Vector bl = random_beta(10, split), br = random_beta(10, split + 1);
        const auto birth = sampler.birth_with(state.model, c, bl, br);
        REQUIRE(birth.available);
        CHECK(birth.proposal.segments() == 2);
        CHECK(birth.proposal.xi[1] == split);
        CHECK(std::abs(birth.proposal.tau2[0] * birth.proposal.tau2[1] - state.model.tau2[0] * state.model.tau2[0]) < 1e-9);
        const auto death = sampler.death_with(birth.proposal, 0, state.model.beta[0]);
        CHECK(std::abs(death.proposal.tau2[0] - state.model.tau2[0]) < 1e-12 * state.model.tau2[0]);
        CHECK(std::abs(birth.log_ratio + death.log_ratio) < 1e-8 * std::max(1.0, std::abs(birth.log_ratio)));
    }
    CHECK_THROWS(sampler.birth_with(state.model, {0, 20, 0.5}, random_beta(10, 1), random_beta(10, 2)));
    CHECK_THROWS(sampler.death_with(state.model, 0, random_beta(10, 1)));
}

TEST_CASE("Gibbs update draws from the inverse gamma conditional", "[changepoint]") {
    const auto x = white_noise(300, 2);
    RJMCMCConfig cfg;
    cfg.max_segments = 5;
    SpectralSampler sampler(x, cfg);
    auto state = sampler.initial_state();
    state.model.beta[0] = random_beta(10, 9);
    const double rate = cfg.tau_scale + 0.5 * state.model.beta[0].tail(10).squaredNorm();
    const double shape = cfg.tau_shape + 5.0;
    double sum = 0;
    const int draws = 40000;
    for (int i = 0; i < draws; ++i) {
        sampler.gibbs_tau2(state);
        sum += state.model.tau2[0];
    }
    const double mean = rate / (shape - 1);
    const double sd = rate / ((shape - 1) * std::sqrt(shape - 2));
    CHECK(std::abs(sum / draws - mean) < 5 * sd / std::sqrt(draws));
}

TEST_CASE("moves keep the chain admissible and the likelihood cache exact", "[changepoint][property]") {
    const auto x = ar_switch(500, 5);
    RJMCMCConfig cfg;
    cfg.seed = 17;
    cfg.max_segments = 4;
    SpectralSampler sampler(x, cfg);
    auto state = sampler.initial_state();
    std::size_t max_seen = 1;
    for (int it = 0; it < 400; ++it) {
        auto b = state.model.segments() < 4 && it % 2 == 0 ? sampler.birth_move(state) : sampler.death_move(state);
        sampler.accept(state, b);
        auto w = sampler.within_move(state);
        sampler.accept(state, w);
        sampler.gibbs_tau2(state);
        REQUIRE(sampler.cache_consistent(state));
        const auto& m = state.model;
        max_seen = std::max(max_seen, m.segments());
        REQUIRE(m.xi.front() == 0);
        REQUIRE(m.xi.back() == 500);
        for (std::size_t j = 0; j < m.segments(); ++j) REQUIRE(m.length(j) >= 40);
        REQUIRE(m.tau2.size() == m.segments());
    }
    CHECK(max_seen >= 2);
}

TEST_CASE("chains are reproducible from their seed", "[changepoint]") {
    const auto x = ar_switch(300, 1);
    RJMCMCConfig cfg;
    cfg.iterations = 300;
    cfg.burnin = 100;
    cfg.max_segments = 5;
    cfg.seed = 99;
    const auto a = run_rjmcmc(x, cfg);
    const auto b = run_rjmcmc(x, cfg);
    CHECK(a.log_posterior == b.log_posterior);
    CHECK(a.segments == b.segments);
    REQUIRE(a.samples.size() == 200);
    CHECK(a.log_posterior.size() == 300);
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].xi == b.samples[i].xi);
    cfg.seed = 100;
    CHECK(run_rjmcmc(x, cfg).log_posterior != a.log_posterior);
    CHECK(a.counters.within_proposed == 300);
    CHECK(a.counters.birth_proposed + a.counters.death_proposed + a.counters.between_skipped == 300);
}

TEST_CASE("derived seeds are distinct and stable", "[changepoint]") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(42, 3) == derive_seed(42, 3));
    CHECK(derive_seed(42, 3) != derive_seed(43, 3));
}

TEST_CASE("posterior extraction counts samples under the modal segment count", "[changepoint]") {
    RJMCMCConfig cfg;
    cfg.t_min = 40;
    Chain chain;
    chain.series_length = 400;
    auto model = [](std::vector<std::size_t> xi) {
        SegmentModel m;
        m.xi = std::move(xi);
        m.beta.assign(m.xi.size() - 1, Vector::Zero(11));
        m.tau2.assign(m.xi.size() - 1, 1.0);
        return m;
    };
    for (int i = 0; i < 3; ++i) chain.samples.push_back(model({0, 200, 400}));
    chain.samples.push_back(model({0, 210, 400}));
    chain.samples.push_back(model({0, 100, 300, 400}));
    chain.samples.push_back(model({0, 400}));
    const auto post = extract_posterior(chain, cfg);
    CHECK(post.map_m == 2);
    REQUIRE(post.distributions.size() == 1);
    CHECK(post.distributions[0].at(200) == 0.75);
    CHECK(post.distributions[0].at(210) == 0.25);

    Chain tie;
    tie.series_length = 400;
    tie.samples = {model({0, 400}), model({0, 200, 400})};
    CHECK(extract_posterior(tie, cfg).map_m == 1);
    CHECK(extract_posterior(tie, cfg).distributions.empty());

    Chain bad;
    bad.series_length = 400;
    bad.samples = {model({0, 10, 400})};
    CHECK_THROWS(extract_posterior(bad, cfg));
    CHECK_THROWS(extract_posterior(Chain{}, cfg));
}

TEST_CASE("a switching AR process yields two segments near the switch", "[changepoint][slow]") {
    const auto x = ar_switch(600, 21);
    RJMCMCConfig cfg;
    cfg.iterations = 3000;
    cfg.burnin = 1500;
    cfg.seed = 3;
    const auto chain = run_rjmcmc(x, cfg);
    const auto post = extract_posterior(chain, cfg);
    REQUIRE(post.map_m == 2);
    const auto mode = std::max_element(post.distributions[0].begin(), post.distributions[0].end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    CHECK(std::abs(static_cast<double>(mode->first) - 300.0) <= 15.0);
}
