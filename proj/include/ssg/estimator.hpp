#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ssg/model.hpp"
#include "ssg/noise.hpp"
#include "ssg/numerics.hpp"

namespace ssg {

/// Discretized observations X(t_j) = a(t_j, θ) + ε(t_j).
struct Observation
{
    struct Provenance
    {
        std::vector<double> theta_true;
        std::uint64_t noise_seed = 0;
    };

    TimeGrid grid;
    std::vector<double> x_values;
    std::optional<Provenance> provenance;

    /// Validates lengths and finiteness.
    Observation(TimeGrid grid, std::vector<double> x_values,
                std::optional<Provenance> provenance = std::nullopt);
};

/// Synthetic observation of `model` at θ_true corrupted by `noise`.
Observation make_observation(RegressionModel const& model, std::span<double const> theta_true,
                             NoisePath const& noise);

/// Q_T(τ) = ∫ [X(t) − a(t, τ)]² dt; throws DomainError outside the box.
double objective(Observation const& obs, RegressionModel const& model,
                 std::span<double const> tau);

/// ∇Q_T(τ) = −2 ∫ [X(t) − a(t, τ)] ∇a(t, τ) dt.
std::vector<double> objective_gradient(Observation const& obs, RegressionModel const& model,
                                       std::span<double const> tau);

struct LseOptions
{
    std::size_t coarse_grid_per_dim = 11;
    double local_tol = 1e-8;  ///< step tolerance relative to the box diameter
    std::size_t max_iter = 200;
    std::size_t n_starts = 3;
};

struct LseResult
{
    std::vector<double> theta_hat;
    double q_value = 0.0;
    std::size_t n_restarts = 0;
    bool converged = false;
    bool boundary = false;
    std::size_t lattice_ties = 1;  ///< lattice points within 1e-10 of the lattice minimum
    std::size_t iterations = 0;
};

/*!
 * Least-squares estimate over the closed box.
 *
 * A full lattice scan picks the `n_starts` best nodes (ties go to the
 * lexicographically smallest parameter); each is refined with projected
 * Gauss-Newton steps with step halving. Returns the best refined point.
 * Throws DataError on a non-finite lattice objective and NonConvergence when
 * every refinement fails.
 */
LseResult lse_fit(Observation const& obs, RegressionModel const& model,
                  LseOptions const& opts = {});

/// ‖N (θ̂ − θ)‖ for a diagonal norming N.
double normalized_deviation(std::span<double const> theta_hat, std::span<double const> theta_true,
                            std::span<double const> norming);

}  // namespace ssg
