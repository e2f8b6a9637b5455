#include "marketstruct/changepoint.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>
#include <unordered_map>

namespace marketstruct {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kUClamp = 1e-12;
constexpr double kGradientTolerance = 1e-8;
constexpr int kMaxNewtonIterations = 100;
constexpr std::size_t kMaxCachedDoubles = std::size_t{1} << 22;

// FFTW planning is not thread-safe; plans are created once per length under a
// lock and executed on caller-owned buffers.
fftw_plan r2c_plan(int n) {
    static std::mutex mu;
    static std::unordered_map<int, fftw_plan> plans;
    std::lock_guard lock(mu);
    if (auto it = plans.find(n); it != plans.end()) return it->second;
    double* in = fftw_alloc_real(static_cast<std::size_t>(n));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (p == nullptr) throw Error("FFTW could not plan a transform of length " + std::to_string(n));
    plans.emplace(n, p);
    return p;
}

std::size_t bin_count(std::size_t n) {
    return (n - 1) / 2;
}

double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

WhittleDerivatives derivatives_with(const Matrix& X, const Vector& I, const Vector& beta) {
    const Vector g = X * beta;
    const Vector w = (I.array() * (-g.array()).exp()).matrix();
    WhittleDerivatives d;
    d.value = -(g.sum() + w.sum());
    d.gradient = -(X.transpose() * (Vector::Ones(w.size()) - w));
    d.hessian = -(X.transpose() * w.asDiagonal() * X);
    return d;
}

double loglik_with(const Matrix& X, const Vector& I, const Vector& beta) {
    const Vector g = X * beta;
    return -(g.sum() + (I.array() * (-g.array()).exp()).sum());
}

Vector prior_precision(int n_basis, double tau2, double sigma0_sq) {
    Vector p = Vector::Constant(n_basis + 1, 1.0 / tau2);
    p(0) = 1.0 / sigma0_sq;
    return p;
}

struct NewtonPoint {
    Vector beta;
    double value = 0.0;
    Vector gradient;
    Matrix neg_hessian;
};

NewtonPoint evaluate(const Matrix& X, const Vector& I, const Vector& P, const Vector& beta) {
    auto d = derivatives_with(X, I, beta);
    NewtonPoint pt;
    pt.beta = beta;
    pt.value = d.value - 0.5 * (P.array() * beta.array().square()).sum();
    pt.gradient = d.gradient - (P.array() * beta.array()).matrix();
    pt.neg_hessian = -d.hessian;
    pt.neg_hessian.diagonal() += P;
    return pt;
}

BetaApproximation newton_mode(const Matrix& X, const Vector& I, double tau2, double sigma0_sq, int n_basis) {
    if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw Error("tau^2 must be positive and finite");
    if (X.cols() != n_basis + 1) throw Error("basis size mismatch");
    const Vector P = prior_precision(n_basis, tau2, sigma0_sq);

    Vector start = Vector::Zero(n_basis + 1);
    start(0) = std::log(std::max(I.mean(), 1e-300));
    NewtonPoint pt = evaluate(X, I, P, start);

    for (int iter = 0;; ++iter) {
        Eigen::LLT<Matrix> llt(pt.neg_hessian);
        if (llt.info() != Eigen::Success)
            throw Error("negative Hessian of the segment posterior is not positive definite");
        const double gnorm = pt.gradient.norm();
        if (gnorm < kGradientTolerance) {
            BetaApproximation out;
            out.mode = pt.beta;
            out.precision = pt.neg_hessian;
            out.precision_chol_lower = llt.matrixL();
            out.log_det_precision = 2.0 * out.precision_chol_lower.diagonal().array().log().sum();
            out.covariance = llt.solve(Matrix::Identity(P.size(), P.size()));
            out.gradient_norm = gnorm;
            out.iterations = iter;
            return out;
        }
        if (iter == kMaxNewtonIterations)
            throw Error("Newton iterations for the segment coefficients did not converge (|grad| = " +
                        std::to_string(gnorm) + ")");

        const Vector step = llt.solve(pt.gradient);
        const double decrement = pt.gradient.dot(step);
        // Below this the objective cannot resolve progress, so steps are judged by the gradient.
        const double resolution = 1e-13 * std::max(1.0, std::abs(pt.value));
        double t = 1.0;
        for (;;) {
            NewtonPoint trial = evaluate(X, I, P, pt.beta + t * step);
            const bool ascent = trial.value >= pt.value + 1e-4 * t * decrement;
            const bool flat = decrement < resolution && std::abs(trial.value - pt.value) <= resolution &&
                              trial.gradient.norm() < gnorm;
            if (std::isfinite(trial.value) && (ascent || flat)) {
                pt = std::move(trial);
                break;
            }
            t *= 0.5;
            if (t < 1e-12)
                throw Error("Newton line search failed for the segment coefficients (|grad| = " +
                            std::to_string(gnorm) + ")");
        }
    }
}

} // namespace

void RJMCMCConfig::validate(std::size_t series_length) const {
    if (iterations <= 0) throw Error("iterations must be positive");
    if (burnin < 0 || burnin >= iterations) throw Error("burnin must satisfy 0 <= burnin < iterations");
    if (n_basis < 0) throw Error("number of basis functions must be non-negative");
    if (t_min < 4 || t_min < 2 * n_basis) throw Error("t_min must be >= max(4, 2 * n_basis)");
    if (max_segments < 1) throw Error("max_segments must be at least 1");
    if (!(mix_pi >= 0.0 && mix_pi <= 1.0)) throw Error("mix_pi must lie in [0, 1]");
    if (!(tau_shape > 0.0 && tau_scale > 0.0)) throw Error("tau prior shape and scale must be positive");
    if (!(sigma0_sq > 0.0)) throw Error("sigma0_sq must be positive");
    if (series_length < 2 * static_cast<std::size_t>(t_min))
        throw Error("series of length " + std::to_string(series_length) + " is shorter than 2 * t_min");
    if (static_cast<std::size_t>(max_segments) * static_cast<std::size_t>(t_min) > series_length)
        throw Error("max_segments * t_min exceeds the series length");
}

Vector Periodogram::frequencies() const {
    Vector f(power.size());
    for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = static_cast<double>(k + 1) / static_cast<double>(n);
    return f;
}

Periodogram periodogram(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) throw Error("periodogram needs at least 4 observations, got " + std::to_string(n));
    std::vector<double> in(x.begin(), x.end());
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_execute_dft_r2c(r2c_plan(static_cast<int>(n)), in.data(), out.data());
    const std::size_t K = bin_count(n);
    Periodogram p{n, Vector(static_cast<Eigen::Index>(K))};
    for (std::size_t k = 1; k <= K; ++k)
        p.power(static_cast<Eigen::Index>(k - 1)) = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / static_cast<double>(n);
    return p;
}

Periodogram demeaned_periodogram(std::span<const double> x) {
    if (x.empty()) throw Error("periodogram of an empty segment");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> centred(x.begin(), x.end());
    for (double& v : centred) v -= mean;
    return periodogram(centred);
}

Matrix spectral_basis(std::size_t n, int n_basis) {
    const std::size_t K = bin_count(n);
    Matrix X(static_cast<Eigen::Index>(K), n_basis + 1);
    for (std::size_t k = 1; k <= K; ++k) {
        const double nu = static_cast<double>(k) / static_cast<double>(n);
        X(static_cast<Eigen::Index>(k - 1), 0) = 1.0;
        for (int s = 1; s <= n_basis; ++s)
            X(static_cast<Eigen::Index>(k - 1), s) = std::numbers::sqrt2 * std::cos(2.0 * std::numbers::pi * s * nu);
    }
    return X;
}

Vector log_spectrum(const Vector& beta, const Vector& freqs) {
    Vector g = Vector::Constant(freqs.size(), beta(0));
    for (Eigen::Index s = 1; s < beta.size(); ++s)
        g.array() += beta(s) * std::numbers::sqrt2 *
                     (2.0 * std::numbers::pi * static_cast<double>(s) * freqs.array()).cos();
    return g;
}

double whittle_loglik(const Periodogram& pgram, const Vector& beta) {
    return loglik_with(spectral_basis(pgram.n, static_cast<int>(beta.size()) - 1), pgram.power, beta);
}

double segment_loglik(std::span<const double> x, const Vector& beta) {
    return whittle_loglik(demeaned_periodogram(x), beta);
}

WhittleDerivatives whittle_derivatives(const Periodogram& pgram, const Vector& beta) {
    return derivatives_with(spectral_basis(pgram.n, static_cast<int>(beta.size()) - 1), pgram.power, beta);
}

BetaApproximation beta_mode_and_hessian(const Periodogram& pgram, double tau2, double sigma0_sq, int n_basis) {
    return newton_mode(spectral_basis(pgram.n, n_basis), pgram.power, tau2, sigma0_sq, n_basis);
}

BetaApproximation beta_mode_and_hessian(std::span<const double> x, double tau2, const RJMCMCConfig& cfg) {
    return beta_mode_and_hessian(demeaned_periodogram(x), tau2, cfg.sigma0_sq, cfg.n_basis);
}

double log_gaussian_density(const Vector& beta, const BetaApproximation& approx) {
    const Vector r = approx.precision_chol_lower.transpose() * (beta - approx.mode);
    return -0.5 * static_cast<double>(beta.size()) * kLog2Pi + 0.5 * approx.log_det_precision - 0.5 * r.squaredNorm();
}

double log_beta_prior(const Vector& beta, double tau2, double sigma0_sq) {
    double lp = -0.5 * (kLog2Pi + std::log(sigma0_sq)) - 0.5 * beta(0) * beta(0) / sigma0_sq;
    const auto J = static_cast<double>(beta.size() - 1);
    lp += -0.5 * J * (kLog2Pi + std::log(tau2)) - 0.5 * beta.tail(beta.size() - 1).squaredNorm() / tau2;
    return lp;
}

double log_inverse_gamma(double x, double shape, double scale) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_partition_prior(std::size_t T, std::size_t m, std::size_t t_min) {
    if (m == 0 || m * t_min > T) return -std::numeric_limits<double>::infinity();
    // compositions of T into m parts each >= t_min
    const double free = static_cast<double>(T - m * t_min);
    return -log_choose(free + static_cast<double>(m) - 1.0, static_cast<double>(m) - 1.0);
}

MoveProbabilities between_model_probabilities(std::size_t m, std::size_t splittable, int max_segments) {
    const bool birth = m < static_cast<std::size_t>(max_segments) && splittable > 0;
    const bool death = m > 1;
    if (birth && death) return {0.5, 0.5};
    if (birth) return {1.0, 0.0};
    if (death) return {0.0, 1.0};
    return {};
}

std::map<std::size_t, double> relocation_proposal(std::size_t prev, std::size_t current, std::size_t next,
                                                  std::size_t t_min, double mix_pi) {
    if (current < prev + t_min || current + t_min > next) throw Error("changepoint violates t_min");
    std::map<std::size_t, double> pmf;
    const std::size_t lo = prev + t_min;
    const std::size_t hi = next - t_min;
    const double q1 = 1.0 / static_cast<double>(hi - lo + 1);
    for (std::size_t t = lo; t <= hi; ++t) pmf[t] += mix_pi * q1;

    const bool left_min = current - prev == t_min;
    const bool right_min = next - current == t_min;
    const double w = 1.0 - mix_pi;
    if (!left_min && !right_min) {
        for (std::size_t t : {current - 1, current, current + 1}) pmf[t] += w / 3.0;
    } else if (left_min && !right_min) {
        pmf[current] += w / 2.0;
        pmf[current + 1] += w / 2.0;
    } else if (!left_min && right_min) {
        pmf[current - 1] += w / 2.0;
        pmf[current] += w / 2.0;
    } else {
        pmf[current] += w;
    }
    return pmf;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// SpectralSampler

struct SpectralSampler::Cache {
    std::unordered_map<std::uint64_t, Periodogram> periodograms;
    std::unordered_map<std::size_t, Matrix> bases;
    struct ApproxKey {
        std::size_t begin, end;
        std::uint64_t tau_bits;
        bool operator==(const ApproxKey&) const = default;
    };
    struct ApproxHash {
        std::size_t operator()(const ApproxKey& k) const noexcept {
            return std::hash<std::uint64_t>{}(k.begin * 0x100000001B3ULL ^ (k.end << 21) ^ k.tau_bits);
        }
    };
    std::unordered_map<ApproxKey, BetaApproximation, ApproxHash> approximations;
    std::size_t cached_doubles = 0;

    void trim() {
        if (cached_doubles > kMaxCachedDoubles) {
            periodograms.clear();
            cached_doubles = 0;
        }
        if (approximations.size() > 4096) approximations.clear();
    }
};

SpectralSampler::SpectralSampler(std::span<const double> x, RJMCMCConfig cfg)
    : x_(x.begin(), x.end()), cfg_(cfg), cache_(std::make_unique<Cache>()) {
    cfg_.validate(x_.size());
    for (double v : x_)
        if (!std::isfinite(v)) throw Error("series contains non-finite values");
}

SpectralSampler::~SpectralSampler() = default;
SpectralSampler::SpectralSampler(SpectralSampler&&) noexcept = default;
SpectralSampler& SpectralSampler::operator=(SpectralSampler&&) noexcept = default;

const Periodogram& SpectralSampler::segment_periodogram(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > x_.size()) throw Error("segment bounds out of range");
    const std::uint64_t key = static_cast<std::uint64_t>(begin) * (x_.size() + 1) + end;
    auto it = cache_->periodograms.find(key);
    if (it == cache_->periodograms.end()) {
        auto p = demeaned_periodogram(std::span<const double>(x_).subspan(begin, end - begin));
        cache_->cached_doubles += static_cast<std::size_t>(p.power.size());
        it = cache_->periodograms.emplace(key, std::move(p)).first;
    }
    return it->second;
}

namespace {

const Matrix& basis_for(std::unordered_map<std::size_t, Matrix>& bases, std::size_t n, int n_basis) {
    auto it = bases.find(n);
    if (it == bases.end()) it = bases.emplace(n, spectral_basis(n, n_basis)).first;
    return it->second;
}

} // namespace

double SpectralSampler::segment_loglik(std::size_t begin, std::size_t end, const Vector& beta) const {
    const auto& p = segment_periodogram(begin, end);
    return loglik_with(basis_for(cache_->bases, p.n, cfg_.n_basis), p.power, beta);
}

BetaApproximation SpectralSampler::approximation(std::size_t begin, std::size_t end, double tau2) const {
    const Cache::ApproxKey key{begin, end, std::bit_cast<std::uint64_t>(tau2)};
    if (auto it = cache_->approximations.find(key); it != cache_->approximations.end()) return it->second;
    const auto& p = segment_periodogram(begin, end);
    BetaApproximation a;
    try {
        a = newton_mode(basis_for(cache_->bases, p.n, cfg_.n_basis), p.power, tau2, cfg_.sigma0_sq, cfg_.n_basis);
    } catch (const Error& e) {
        throw Error(std::string(e.what()) + " for segment [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
    }
    cache_->approximations.emplace(key, a);
    return a;
}

std::vector<double> SpectralSampler::segment_logliks(const SegmentModel& model) const {
    std::vector<double> out(model.segments());
    for (std::size_t j = 0; j < model.segments(); ++j) out[j] = segment_loglik(model.xi[j], model.xi[j + 1], model.beta[j]);
    return out;
}

double SpectralSampler::log_posterior(const SegmentModel& model) const {
    double lp = log_partition_prior(x_.size(), model.segments(), static_cast<std::size_t>(cfg_.t_min)) -
                std::log(static_cast<double>(cfg_.max_segments));
    for (std::size_t j = 0; j < model.segments(); ++j) {
        lp += segment_loglik(model.xi[j], model.xi[j + 1], model.beta[j]);
        lp += log_beta_prior(model.beta[j], model.tau2[j], cfg_.sigma0_sq);
        lp += log_inverse_gamma(model.tau2[j], cfg_.tau_shape, cfg_.tau_scale);
    }
    return lp;
}

std::size_t SpectralSampler::splittable_segments(const SegmentModel& model) const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < model.segments(); ++j)
        if (model.length(j) >= 2 * static_cast<std::size_t>(cfg_.t_min)) ++n;
    return n;
}

ChainState SpectralSampler::initial_state() const {
    ChainState s;
    s.rng.seed(cfg_.seed);
    s.model.xi = {0, x_.size()};
    s.model.tau2 = {1.0};
    s.model.beta = {approximation(0, x_.size(), 1.0).mode};
    s.loglik = segment_logliks(s.model);
    return s;
}

Vector SpectralSampler::draw_beta(const BetaApproximation& approx, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(approx.mode.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    // precision = L L^T, so L^{-T} z has covariance precision^{-1}
    return approx.mode + approx.precision_chol_lower.transpose().triangularView<Eigen::Upper>().solve(z);
}

double SpectralSampler::split_log_ratio(const SegmentModel& coarse, std::size_t k, const SegmentModel& fine,
                                        double log_jacobian) const {
    const std::size_t T = x_.size();
    const auto t_min = static_cast<std::size_t>(cfg_.t_min);
    const std::size_t m = coarse.segments();
    const std::size_t b = coarse.xi[k], e = coarse.xi[k + 1], s = fine.xi[k + 1];
    const Vector& beta_k = coarse.beta[k];
    const Vector& beta_l = fine.beta[k];
    const Vector& beta_r = fine.beta[k + 1];
    const double tau_k = coarse.tau2[k], tau_l = fine.tau2[k], tau_r = fine.tau2[k + 1];

    const auto forward = between_model_probabilities(m, splittable_segments(coarse), cfg_.max_segments);
    const auto reverse = between_model_probabilities(m + 1, splittable_segments(fine), cfg_.max_segments);
    if (forward.birth == 0.0 || reverse.death == 0.0) return -std::numeric_limits<double>::infinity();

    double target = segment_loglik(b, s, beta_l) + segment_loglik(s, e, beta_r) - segment_loglik(b, e, beta_k);
    target += log_beta_prior(beta_l, tau_l, cfg_.sigma0_sq) + log_beta_prior(beta_r, tau_r, cfg_.sigma0_sq) -
              log_beta_prior(beta_k, tau_k, cfg_.sigma0_sq);
    target += log_inverse_gamma(tau_l, cfg_.tau_shape, cfg_.tau_scale) +
              log_inverse_gamma(tau_r, cfg_.tau_shape, cfg_.tau_scale) -
              log_inverse_gamma(tau_k, cfg_.tau_shape, cfg_.tau_scale);
    target += log_partition_prior(T, m + 1, t_min) - log_partition_prior(T, m, t_min);

    // reverse: death picks one of m changepoints and redraws the merged coefficients
    const double log_reverse = std::log(reverse.death) - std::log(static_cast<double>(m)) +
                               log_gaussian_density(beta_k, approximation(b, e, tau_k));
    // forward: birth picks a splittable segment, a split point and u ~ U(0,1)
    const double split_points = static_cast<double>(e - b - 2 * t_min + 1);
    const double log_forward = std::log(forward.birth) - std::log(static_cast<double>(splittable_segments(coarse))) -
                               std::log(split_points) + log_gaussian_density(beta_l, approximation(b, s, tau_l)) +
                               log_gaussian_density(beta_r, approximation(s, e, tau_r));
    return target + log_reverse - log_forward + log_jacobian;
}

MoveProposal SpectralSampler::birth_with(const SegmentModel& current, const SplitChoice& choice,
                                         const Vector& beta_left, const Vector& beta_right) const {
    const auto t_min = static_cast<std::size_t>(cfg_.t_min);
    const std::size_t k = choice.segment;
    if (k >= current.segments()) throw Error("birth segment out of range");
    const std::size_t b = current.xi[k], e = current.xi[k + 1];
    if (choice.split < b + t_min || choice.split + t_min > e) throw Error("birth split violates t_min");
    const double u = std::clamp(choice.u, kUClamp, 1.0 - kUClamp);
    const double tau = current.tau2[k];

    MoveProposal out;
    out.available = true;
    out.proposal = current;
    auto& p = out.proposal;
    p.xi.insert(p.xi.begin() + static_cast<std::ptrdiff_t>(k) + 1, choice.split);
    p.tau2[k] = u / (1.0 - u) * tau;
    p.tau2.insert(p.tau2.begin() + static_cast<std::ptrdiff_t>(k) + 1, (1.0 - u) / u * tau);
    p.beta[k] = beta_left;
    p.beta.insert(p.beta.begin() + static_cast<std::ptrdiff_t>(k) + 1, beta_right);

    const double log_jacobian = std::log(2.0 * tau / (u * (1.0 - u)));
    out.log_ratio = split_log_ratio(current, k, p, log_jacobian);
    return out;
}

MoveProposal SpectralSampler::death_with(const SegmentModel& current, std::size_t changepoint,
                                         const Vector& beta_merged) const {
    if (current.segments() < 2) throw Error("death needs at least two segments");
    const std::size_t k = changepoint;
    if (k + 1 >= current.segments()) throw Error("death changepoint out of range");
    const double tau_l = current.tau2[k], tau_r = current.tau2[k + 1];

    MoveProposal out;
    out.available = true;
    out.proposal = current;
    auto& p = out.proposal;
    p.xi.erase(p.xi.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    p.tau2[k] = std::sqrt(tau_l * tau_r);
    p.tau2.erase(p.tau2.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    p.beta[k] = beta_merged;
    p.beta.erase(p.beta.begin() + static_cast<std::ptrdiff_t>(k) + 1);

    // |d(tau_l^2, tau_r^2) / d(tau^2, u)| written in the split amplitudes
    const double sum = std::sqrt(tau_l) + std::sqrt(tau_r);
    const double log_jacobian = std::log(2.0 * sum * sum);
    out.log_ratio = -split_log_ratio(p, k, current, log_jacobian);
    return out;
}

MoveProposal SpectralSampler::birth_move(ChainState& state) const {
    const auto& cur = state.model;
    const auto t_min = static_cast<std::size_t>(cfg_.t_min);
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < cur.segments(); ++j)
        if (cur.length(j) >= 2 * t_min) candidates.push_back(j);
    if (candidates.empty() || cur.segments() >= static_cast<std::size_t>(cfg_.max_segments)) return {};

    auto& rng = state.rng;
    const std::size_t k = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    const std::size_t b = cur.xi[k], e = cur.xi[k + 1];
    const std::size_t split = std::uniform_int_distribution<std::size_t>(b + t_min, e - t_min)(rng);
    const double u = std::clamp(std::uniform_real_distribution<double>(0.0, 1.0)(rng), kUClamp, 1.0 - kUClamp);
    const double tau = cur.tau2[k];
    const Vector beta_l = draw_beta(approximation(b, split, u / (1.0 - u) * tau), rng);
    const Vector beta_r = draw_beta(approximation(split, e, (1.0 - u) / u * tau), rng);
    return birth_with(cur, {k, split, u}, beta_l, beta_r);
}

MoveProposal SpectralSampler::death_move(ChainState& state) const {
    const auto& cur = state.model;
    if (cur.segments() < 2) return {};
    auto& rng = state.rng;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, cur.segments() - 2)(rng);
    const double tau = std::sqrt(cur.tau2[k] * cur.tau2[k + 1]);
    const Vector beta = draw_beta(approximation(cur.xi[k], cur.xi[k + 2], tau), rng);
    return death_with(cur, k, beta);
}

MoveProposal SpectralSampler::within_move(ChainState& state) const {
    const auto& cur = state.model;
    if (cur.segments() < 2) return {};
    const auto t_min = static_cast<std::size_t>(cfg_.t_min);
    auto& rng = state.rng;
    const std::size_t c = std::uniform_int_distribution<std::size_t>(1, cur.segments() - 1)(rng);
    const std::size_t prev = cur.xi[c - 1], now = cur.xi[c], next = cur.xi[c + 1];

    std::size_t t = now;
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg_.mix_pi) {
        t = std::uniform_int_distribution<std::size_t>(prev + t_min, next - t_min)(rng);
    } else {
        const bool left_min = now - prev == t_min;
        const bool right_min = next - now == t_min;
        if (!left_min && !right_min) t = now - 1 + std::uniform_int_distribution<std::size_t>(0, 2)(rng);
        else if (left_min && !right_min) t = now + std::uniform_int_distribution<std::size_t>(0, 1)(rng);
        else if (!left_min && right_min) t = now - std::uniform_int_distribution<std::size_t>(0, 1)(rng);
    }

    const double tau_l = cur.tau2[c - 1], tau_r = cur.tau2[c];
    const auto approx_l = approximation(prev, t, tau_l);
    const auto approx_r = approximation(t, next, tau_r);
    MoveProposal out;
    out.available = true;
    out.proposal = cur;
    auto& p = out.proposal;
    p.xi[c] = t;
    p.beta[c - 1] = draw_beta(approx_l, rng);
    p.beta[c] = draw_beta(approx_r, rng);

    const double s0 = cfg_.sigma0_sq;
    const double proposed = segment_loglik(prev, t, p.beta[c - 1]) + segment_loglik(t, next, p.beta[c]) +
                            log_beta_prior(p.beta[c - 1], tau_l, s0) + log_beta_prior(p.beta[c], tau_r, s0);
    const double current = state.loglik[c - 1] + state.loglik[c] + log_beta_prior(cur.beta[c - 1], tau_l, s0) +
                           log_beta_prior(cur.beta[c], tau_r, s0);
    const double q_current = log_gaussian_density(cur.beta[c - 1], approximation(prev, now, tau_l)) +
                             log_gaussian_density(cur.beta[c], approximation(now, next, tau_r));
    const double q_proposed = log_gaussian_density(p.beta[c - 1], approx_l) + log_gaussian_density(p.beta[c], approx_r);
    const double move_fwd = relocation_proposal(prev, now, next, t_min, cfg_.mix_pi).at(t);
    const double move_rev = relocation_proposal(prev, t, next, t_min, cfg_.mix_pi).at(now);
    out.log_ratio = proposed - current + q_current - q_proposed + std::log(move_rev) - std::log(move_fwd);
    return out;
}

MoveProposal SpectralSampler::refresh_single(ChainState& state) const {
    const auto& cur = state.model;
    const std::size_t T = x_.size();
    const double tau = cur.tau2[0];
    const auto approx = approximation(0, T, tau);
    MoveProposal out;
    out.available = true;
    out.proposal = cur;
    out.proposal.beta[0] = draw_beta(approx, state.rng);
    const double s0 = cfg_.sigma0_sq;
    const double proposed = segment_loglik(0, T, out.proposal.beta[0]) + log_beta_prior(out.proposal.beta[0], tau, s0);
    const double current = state.loglik[0] + log_beta_prior(cur.beta[0], tau, s0);
    out.log_ratio = proposed - current + log_gaussian_density(cur.beta[0], approx) -
                    log_gaussian_density(out.proposal.beta[0], approx);
    return out;
}

void SpectralSampler::gibbs_tau2(ChainState& state) const {
    const double shape = cfg_.tau_shape + 0.5 * cfg_.n_basis;
    std::gamma_distribution<double> gamma(shape, 1.0);
    for (std::size_t j = 0; j < state.model.segments(); ++j) {
        const auto& beta = state.model.beta[j];
        const double rate = cfg_.tau_scale + 0.5 * beta.tail(beta.size() - 1).squaredNorm();
        double g = gamma(state.rng);
        while (!(g > 0.0)) g = gamma(state.rng);
        state.model.tau2[j] = rate / g;
    }
}

bool SpectralSampler::accept(ChainState& state, MoveProposal& proposal) const {
    if (!proposal.available || !(proposal.log_ratio > -std::numeric_limits<double>::infinity())) return false;
    const double log_u = std::log(std::uniform_real_distribution<double>(0.0, 1.0)(state.rng));
    if (!(log_u < std::min(0.0, proposal.log_ratio))) return false;
    state.model = std::move(proposal.proposal);
    state.loglik = segment_logliks(state.model);
    return true;
}

bool SpectralSampler::cache_consistent(const ChainState& state, double tolerance) const {
    const auto fresh = segment_logliks(state.model);
    if (fresh.size() != state.loglik.size()) return false;
    for (std::size_t j = 0; j < fresh.size(); ++j)
        if (std::abs(fresh[j] - state.loglik[j]) > tolerance * std::max(1.0, std::abs(fresh[j]))) return false;
    return true;
}

Chain SpectralSampler::run() {
    Chain chain;
    chain.series_length = x_.size();
    ChainState state = initial_state();
    const auto t_min = static_cast<std::size_t>(cfg_.t_min);
    chain.log_posterior.reserve(static_cast<std::size_t>(cfg_.iterations));
    chain.segments.reserve(static_cast<std::size_t>(cfg_.iterations));
    chain.samples.reserve(static_cast<std::size_t>(cfg_.iterations - cfg_.burnin));

    for (int it = 0; it < cfg_.iterations; ++it) {
        cache_->trim();
        const auto probs = between_model_probabilities(state.model.segments(), splittable_segments(state.model),
                                                       cfg_.max_segments);
        if (probs.birth + probs.death == 0.0) {
            ++chain.counters.between_skipped;
        } else if (std::uniform_real_distribution<double>(0.0, 1.0)(state.rng) < probs.birth) {
            auto p = birth_move(state);
            ++chain.counters.birth_proposed;
            if (accept(state, p)) ++chain.counters.birth_accepted;
        } else {
            auto p = death_move(state);
            ++chain.counters.death_proposed;
            if (accept(state, p)) ++chain.counters.death_accepted;
        }

        auto w = state.model.segments() > 1 ? within_move(state) : refresh_single(state);
        ++chain.counters.within_proposed;
        if (accept(state, w)) ++chain.counters.within_accepted;

        gibbs_tau2(state);

        const auto m = state.model.segments();
        if (m < 1 || m > static_cast<std::size_t>(cfg_.max_segments))
            throw std::logic_error("chain left the admissible segment-count range");
        for (std::size_t j = 0; j < m; ++j)
            if (state.model.length(j) < t_min) throw std::logic_error("chain produced a segment shorter than t_min");

        double lp = 0.0;
        for (double v : state.loglik) lp += v;
        lp += log_partition_prior(x_.size(), m, t_min) - std::log(static_cast<double>(cfg_.max_segments));
        for (std::size_t j = 0; j < m; ++j)
            lp += log_beta_prior(state.model.beta[j], state.model.tau2[j], cfg_.sigma0_sq) +
                  log_inverse_gamma(state.model.tau2[j], cfg_.tau_shape, cfg_.tau_scale);
        chain.log_posterior.push_back(lp);
        chain.segments.push_back(static_cast<int>(m));
        if (it >= cfg_.burnin) chain.samples.push_back(state.model);
    }
    return chain;
}

Chain run_rjmcmc(std::span<const double> x, const RJMCMCConfig& cfg) {
    SpectralSampler sampler(x, cfg);
    return sampler.run();
}

ChangepointPosterior extract_posterior(const Chain& chain, const RJMCMCConfig& cfg) {
    if (chain.samples.empty()) throw Error("cannot extract a posterior from an empty chain");
    std::map<std::size_t, std::size_t> counts;
    for (const auto& s : chain.samples) ++counts[s.segments()];
    std::size_t map_m = 0, best = 0;
    for (const auto& [m, c] : counts)
        if (c > best) {
            best = c;
            map_m = m;
        }
    ChangepointPosterior post;
    post.map_m = static_cast<int>(map_m);
    post.distributions.resize(map_m - 1);
    for (const auto& s : chain.samples) {
        if (s.segments() != map_m) continue;
        for (std::size_t j = 1; j < map_m; ++j) post.distributions[j - 1][s.xi[j]] += 1.0;
    }
    const auto t_min = static_cast<std::size_t>(cfg.t_min);
    for (auto& d : post.distributions) {
        for (auto& [t, p] : d) {
            p /= static_cast<double>(best);
            if (chain.series_length != 0 && (t < t_min || t + t_min > chain.series_length))
                throw Error("changepoint sample outside the admissible range");
        }
    }
    return post;
}

} // namespace marketstruct
