/**
 * @file changepoint.hpp
 * @brief Reversible-jump MCMC over piecewise-stationary spectral segment models.
 *
 * A series of length T is partitioned by changepoints 0 = xi_0 < xi_1 < ... < xi_m = T;
 * segment j covers rows [xi_{j-1}, xi_j) and is at least t_min long. Each segment
 * carries a log-spectrum in a cosine basis
 *
 *     g(nu) = beta_0 + sum_{s=1..J} beta_s sqrt(2) cos(2 pi s nu)
 *
 * scored with the Whittle likelihood of its demeaned periodogram,
 *
 *     log L = - sum_k [ g(nu_k) + I(nu_k) exp(-g(nu_k)) ],  nu_k = k/n, k = 1..floor((n-1)/2).
 *
 * Priors: beta_0 ~ N(0, sigma0^2), beta_s ~ N(0, tau^2), tau^2 ~ IG(a, b), m uniform on
 * {1..M}, partition uniform over t_min-admissible partitions given m.
 *
 * Each sweep runs one between-model move (birth or death), one within-model move
 * (changepoint relocation with redrawn coefficients), then a Gibbs update of every tau^2.
 * Coefficient proposals are Gaussian approximations N(beta_max, Sigma_max) to the
 * conditional posterior, found by Newton iteration.
 */
#pragma once

#include "marketstruct/common.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>

namespace marketstruct {

struct RJMCMCConfig {
    int iterations = 10000;
    int burnin = 5000;
    int t_min = 40;
    int max_segments = 10;
    int n_basis = 10;
    double mix_pi = 0.8;
    std::uint64_t seed = 0;
    double tau_shape = 1.0;  // a
    double tau_scale = 1.0;  // b
    double sigma0_sq = 100.0;

    /// Throws Error when the configuration cannot be run on a series of this length.
    void validate(std::size_t series_length) const;
};

struct SegmentModel {
    std::vector<std::size_t> xi;  // m + 1 entries, xi.front() = 0, xi.back() = T
    std::vector<Vector> beta;     // m vectors of length J + 1
    std::vector<double> tau2;     // m amplitudes

    std::size_t segments() const noexcept { return beta.size(); }
    std::size_t length(std::size_t j) const { return xi[j + 1] - xi[j]; }
};

/// Power at the Fourier frequencies k/n, k = 1..floor((n-1)/2) (zero and Nyquist excluded).
struct Periodogram {
    std::size_t n = 0;  // segment length
    Vector power;       // |DFT|^2 / n

    Eigen::Index bins() const noexcept { return power.size(); }
    Vector frequencies() const;
};

/// Periodogram of x as given (no demeaning). Needs n >= 4.
Periodogram periodogram(std::span<const double> x);

/// Periodogram of x with its mean removed.
Periodogram demeaned_periodogram(std::span<const double> x);

/// bins x (J+1) design matrix of the log-spectrum basis for a segment of length n.
Matrix spectral_basis(std::size_t n, int n_basis);

/// Log-spectrum g on an arbitrary frequency grid (cycles per observation).
Vector log_spectrum(const Vector& beta, const Vector& freqs);

/// Whittle log-likelihood of a periodogram under coefficients beta (J = beta.size() - 1).
double whittle_loglik(const Periodogram& pgram, const Vector& beta);

/// Whittle log-likelihood of a raw segment (demeaned internally).
double segment_loglik(std::span<const double> x, const Vector& beta);

struct WhittleDerivatives {
    double value = 0.0;
    Vector gradient;
    Matrix hessian;
};

/// Whittle log-likelihood with its analytic gradient and Hessian in beta.
WhittleDerivatives whittle_derivatives(const Periodogram& pgram, const Vector& beta);

/// Gaussian approximation to p(beta | segment, tau^2).
struct BetaApproximation {
    Vector mode;
    Matrix covariance;            // inverse negative Hessian of the log posterior at the mode
    Matrix precision;             // negative Hessian at the mode
    Matrix precision_chol_lower;  // L with precision = L L^T
    double log_det_precision = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
};

/// Newton iterations on the log posterior (Whittle + Gaussian prior) until the gradient
/// norm drops below 1e-8 or 100 iterations. Throws on non-convergence.
BetaApproximation beta_mode_and_hessian(const Periodogram& pgram, double tau2, double sigma0_sq,
                                        int n_basis);
BetaApproximation beta_mode_and_hessian(std::span<const double> x, double tau2, const RJMCMCConfig& cfg);

double log_gaussian_density(const Vector& beta, const BetaApproximation& approx);

/// Log prior of beta given tau^2 (intercept variance sigma0^2, others tau^2).
double log_beta_prior(const Vector& beta, double tau2, double sigma0_sq);

double log_inverse_gamma(double x, double shape, double scale);

/// Log of the uniform prior over partitions of T points into m segments of length >= t_min.
double log_partition_prior(std::size_t T, std::size_t m, std::size_t t_min);

/// Proposal probabilities for the number of segments from the current model.
struct MoveProbabilities {
    double birth = 0.0;
    double death = 0.0;
};

MoveProbabilities between_model_probabilities(std::size_t m, std::size_t splittable, int max_segments);

/// Probability mass of relocating changepoint xi (between prev and next) to every admissible t.
std::map<std::size_t, double> relocation_proposal(std::size_t prev, std::size_t current, std::size_t next,
                                                  std::size_t t_min, double mix_pi);

struct ChainState {
    SegmentModel model;
    std::vector<double> loglik;  // per-segment Whittle terms
    std::mt19937_64 rng;
};

struct MoveProposal {
    bool available = false;
    SegmentModel proposal;
    double log_ratio = 0.0;
};

/// Birth split that fully determines a birth proposal except the new coefficients.
struct SplitChoice {
    std::size_t segment = 0;
    std::size_t split = 0;
    double u = 0.5;
};

struct MoveCounters {
    std::size_t birth_proposed = 0, birth_accepted = 0;
    std::size_t death_proposed = 0, death_accepted = 0;
    std::size_t within_proposed = 0, within_accepted = 0;
    std::size_t between_skipped = 0;
};

struct Chain {
    std::vector<SegmentModel> samples;   // post-burn-in
    std::vector<double> log_posterior;   // every sweep
    std::vector<int> segments;           // every sweep
    MoveCounters counters;
    std::size_t series_length = 0;
};

/// Sampler bound to one series. Caches periodograms by segment bounds.
class SpectralSampler {
public:
    SpectralSampler(std::span<const double> x, RJMCMCConfig cfg);
    ~SpectralSampler();
    SpectralSampler(SpectralSampler&&) noexcept;
    SpectralSampler& operator=(SpectralSampler&&) noexcept;

    const RJMCMCConfig& config() const noexcept { return cfg_; }
    std::size_t length() const noexcept { return x_.size(); }

    ChainState initial_state() const;

    const Periodogram& segment_periodogram(std::size_t begin, std::size_t end) const;
    double segment_loglik(std::size_t begin, std::size_t end, const Vector& beta) const;
    BetaApproximation approximation(std::size_t begin, std::size_t end, double tau2) const;

    double log_posterior(const SegmentModel& model) const;
    std::vector<double> segment_logliks(const SegmentModel& model) const;
    std::size_t splittable_segments(const SegmentModel& model) const;

    MoveProposal birth_move(ChainState& state) const;
    MoveProposal death_move(ChainState& state) const;
    MoveProposal within_move(ChainState& state) const;
    void gibbs_tau2(ChainState& state) const;

    /// Deterministic pieces of the between-model moves, used by the random moves above.
    MoveProposal birth_with(const SegmentModel& current, const SplitChoice& choice, const Vector& beta_left,
                            const Vector& beta_right) const;
    MoveProposal death_with(const SegmentModel& current, std::size_t changepoint,
                            const Vector& beta_merged) const;

    /// Accepts or rejects a proposal, updating the cached log-likelihoods.
    bool accept(ChainState& state, MoveProposal& proposal) const;

    bool cache_consistent(const ChainState& state, double tolerance = 1e-10) const;

    Chain run();

private:
    double split_log_ratio(const SegmentModel& coarse, std::size_t k, const SegmentModel& fine,
                           double log_jacobian) const;
    MoveProposal refresh_single(ChainState& state) const;
    Vector draw_beta(const BetaApproximation& approx, std::mt19937_64& rng) const;

    std::vector<double> x_;
    RJMCMCConfig cfg_;
    struct Cache;
    std::unique_ptr<Cache> cache_;
};

Chain run_rjmcmc(std::span<const double> x, const RJMCMCConfig& cfg);

/// Changepoint locations under the MAP segment count.
struct ChangepointPosterior {
    int map_m = 1;
    std::vector<std::map<std::size_t, double>> distributions;  // one per interior changepoint
};

ChangepointPosterior extract_posterior(const Chain& chain, const RJMCMCConfig& cfg);

/// Seed for series `index` derived from a master seed (SplitMix64 mixing).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

} // namespace marketstruct
