#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ssg/bounds.hpp"
#include "ssg/estimator.hpp"
#include "ssg/model.hpp"
#include "ssg/noise.hpp"

namespace ssg {

//---------------------------------------------------------------------------//
// Monte-Carlo trials
//---------------------------------------------------------------------------//

/// Fully resolved description of one Monte-Carlo experiment.
struct ExperimentSpec
{
    std::shared_ptr<RegressionModel const> model;
    std::vector<double> theta_true;
    TimeGrid grid{1.0, 1};
    NoiseSpec noise;
    double noise_scale = 1.0;  ///< 0 gives noise-free observations
    NormingMode norming = NormingMode::s_T;
    std::size_t n_trials = 0;
    std::uint64_t master_seed = 0;
    LseOptions fit;
    double max_failure_fraction = 0.01;
};

struct TrialRecord
{
    std::size_t trial_index = 0;
    std::uint64_t trial_seed = 0;
    std::vector<double> theta_hat;
    double deviation = 0.0;
    bool converged = false;
    bool boundary = false;
};

/// Seed of trial `index`: a pure function of (master_seed, index).
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t index) noexcept;

/// Runs a single trial; non-convergence is recorded, not thrown.
TrialRecord run_trial(ExperimentSpec const& spec, std::span<double const> norming,
                      std::size_t index);

/*!
 * Runs trials [0, n_trials). Output is identical for every worker count.
 * Throws RunFailure when more than max_failure_fraction of the trials did not
 * converge.
 */
std::vector<TrialRecord> run_trials(ExperimentSpec const& spec, unsigned workers = 1);

std::vector<double> deviations(std::span<TrialRecord const> records);

//---------------------------------------------------------------------------//
// Tail estimation
//---------------------------------------------------------------------------//

struct TailEstimate
{
    std::vector<double> R_grid;
    std::vector<std::size_t> counts;
    std::size_t n_trials = 0;
    std::vector<double> p_hat;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    std::vector<double> envelope;  ///< min(1, B_cal e^{−bR²}); empty without constants
    double fitted_rate = 0.0;      ///< NaN when fewer than two levels qualify
    std::size_t rate_levels = 0;
};

/// Minimum exceedance count for a level to enter the rate fit.
inline constexpr std::size_t rate_fit_min_count = 10;

TailEstimate estimate_tail(std::span<double const> deviations, std::span<double const> R_grid,
                           BoundConstants const* consts = nullptr);

TailEstimate estimate_tail(std::span<TrialRecord const> records, std::span<double const> R_grid,
                           BoundConstants const* consts = nullptr);

struct EnvelopeComparison
{
    std::vector<double> envelope;
    std::vector<bool> level_pass;
    bool rate_pass = false;
    bool overall = false;
};

/// Level verdict ci_low <= envelope; rate verdict fitted_rate >= b.
EnvelopeComparison compare_with_envelope(TailEstimate const& tail, BoundConstants const& consts);

struct CalibratedComparison
{
    std::size_t n_calibration = 0;
    TailEstimate training;
    TailEstimate evaluation;
    BoundConstants consts;  ///< with the calibrated B_cal
    EnvelopeComparison comparison;
};

/*!
 * Splits the records into a training prefix of round(fraction·n) trials and
 * the disjoint remainder. B_cal is the smallest prefactor whose envelope
 * covers the upper Clopper-Pearson limit of the training tail at every level;
 * the remainder is then compared against that envelope.
 */
CalibratedComparison calibrated_comparison(std::span<TrialRecord const> records,
                                           std::span<double const> R_grid,
                                           BoundConstants consts, double fraction);

//---------------------------------------------------------------------------//
// Sub-Gaussianity checks
//---------------------------------------------------------------------------//

struct MgfOptions
{
    std::size_t n_rep = 10000;
    std::size_t n_bootstrap = 400;
    double slack = 0.05;
    double max_exponent = 4.0;  ///< bound on ½λ²d₀‖Δ‖²
};

struct MgfReport
{
    std::vector<double> lambda_grid;
    std::vector<double> empirical;
    std::vector<double> band_low;
    std::vector<double> band_high;
    std::vector<double> envelope;
    std::vector<bool> pass;
    bool overall = false;
    double delta_norm_sq = 0.0;
    double sample_variance = 0.0;  ///< of I(T) across replications
};

/*!
 * Empirical MGF of I(T) = ∫ Δ(t) ε(t) dt against exp{½ λ² d₀ ‖Δ‖²_T}.
 *
 * A λ passes when the lower basic-bootstrap 95% band is at most
 * envelope·(1 + slack); non-finite exponential moments fail that λ.
 */
MgfReport mgf_check(NoiseSpec const& source, std::span<double const> delta, TimeGrid const& grid,
                    double d0, std::span<double const> lambda_grid, std::uint64_t seed,
                    MgfOptions const& opts = {}, unsigned workers = 1);

struct QuadraticFormReport
{
    double f0 = 0.0;
    double d0 = 0.0;
    double b1 = 0.0;  ///< (∫∫ B²)^{1/2}
    double b2 = 0.0;  ///< sup_t ∫ |B(t − s)| ds
    std::vector<double> forms;     ///< ⟨BΔ, Δ⟩_T per probe
    std::vector<double> norms_sq;  ///< ‖Δ‖²_T per probe
    double max_ratio = 0.0;        ///< max form/(d₀‖Δ‖²)
    bool bounded = false;          ///< every form <= (1 + 1e-3) d₀ ‖Δ‖²
    bool nonnegative = false;
    bool b1_bounded = false;
    bool b2_bounded = false;
    bool pass = false;
};

/// Random piecewise-constant probe on the grid (1 to 8 pieces, N(0,1) heights).
std::vector<double> random_step_function(TimeGrid const& grid, Engine& engine);

/// ⟨BΔ, Δ⟩_T by nested trapezoid with B(t, s) = B(t − s) from a lag table.
double covariance_form(std::span<double const> lag_table, std::span<double const> delta,
                       TimeGrid const& grid);

/// B(k·h) for k = 0..n_steps.
std::vector<double> covariance_lag_table(FilterKernel const& kernel, TimeGrid const& grid);

QuadraticFormReport quadratic_form_check(FilterKernel const& kernel, TimeGrid const& grid,
                                         std::size_t n_probe, std::uint64_t seed);

}  // namespace ssg
