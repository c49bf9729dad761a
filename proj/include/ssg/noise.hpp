#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssg/numerics.hpp"
#include "ssg/random.hpp"

namespace ssg {

//---------------------------------------------------------------------------//
// Drivers
//---------------------------------------------------------------------------//

/// Unit-variance, mean-zero laws for the increments of ξ. All but
/// centered_exponential are strictly sub-Gaussian; centered_exponential
/// (Exp(1) − 1) is kept as a negative control.
enum class DriverKind
{
    gaussian,
    rademacher,
    uniform_sqrt3,
    centered_exponential,
};

std::string_view to_string(DriverKind kind) noexcept;

/// Throws ConfigError for unknown names.
DriverKind parse_driver(std::string_view name);

constexpr bool is_strictly_sub_gaussian(DriverKind kind) noexcept
{
    return kind != DriverKind::centered_exponential;
}

/// One draw from the named law.
double draw_driver(DriverKind kind, Engine& engine);

/// count i.i.d. draws, deterministic in seed.
std::vector<double> sample_driver(DriverKind kind, std::size_t count, std::uint64_t seed);

//---------------------------------------------------------------------------//
// Filter kernels
//---------------------------------------------------------------------------//

/*!
 * Causal kernel ψ of a physically realizable filter, ψ(t) = 0 for t < 0.
 *
 * The kernel is treated as zero beyond its truncation horizon, chosen so that
 * the discarded energy ∫_H^∞ ψ² is at most `tail_tolerance` of the total.
 * Tabulated kernels interpolate linearly between samples.
 */
class FilterKernel
{
  public:
    enum class Form
    {
        exponential,
        tabulated,
    };

    static constexpr double tail_tolerance = 1e-8;

    /// ψ(t) = e^{−a t}; a > 0.
    static FilterKernel exponential(double rate);

    /// Samples (t_k, ψ_k) with t_0 = 0 and strictly increasing times.
    static FilterKernel tabulated(std::vector<double> times, std::vector<double> values);

    /// Two whitespace-separated columns "time value"; '#' starts a comment.
    static FilterKernel load(std::filesystem::path const& path);

    Form form() const noexcept { return form_; }
    double rate() const noexcept { return rate_; }
    std::vector<double> const& times() const noexcept { return times_; }
    std::vector<double> const& samples() const noexcept { return values_; }

    double operator()(double t) const noexcept;
    double truncation_horizon() const noexcept { return horizon_; }

    /// ∫₀^∞ ψ²(t) dt.
    double energy() const noexcept { return energy_; }

    /// h(iλ) = (2π)^{-1/2} ∫₀^∞ ψ(t) e^{−iλt} dt.
    std::complex<double> transfer(double lambda) const;

    std::string describe() const;

  private:
    FilterKernel() = default;

    Form form_ = Form::exponential;
    double rate_ = 0.0;
    std::vector<double> times_;
    std::vector<double> values_;
    double horizon_ = 0.0;
    double energy_ = 0.0;
};

/// B(t) = ∫₀^∞ ψ(t+u)ψ(u) du by trapezoid over the truncated support; t >= 0.
double covariance_of_filter(FilterKernel const& kernel, double t);

/// f(λ) = |h(iλ)|².
double spectral_density(FilterKernel const& kernel, double lambda);

struct SpectralPeak
{
    double f0 = 0.0;
    double lambda = 0.0;
};

/// sup_λ f(λ) over a logarithmic grid refined until the maximum is stable to
/// 1e-6 relative, followed by a golden-section polish around the best node.
SpectralPeak f0_sup(FilterKernel const& kernel);

/// d₀ = 2π f₀; throws ContractViolation unless 0 < f0 < ∞.
double d0_from_spectral(double f0);

//---------------------------------------------------------------------------//
// Increments and paths
//---------------------------------------------------------------------------//

/*!
 * Increments Δξ(t_i) = ξ(t_i) − ξ(t_i − h) at the nodes t_i = i·h,
 * i = −n_prehistory, …, n_steps.
 */
struct Increments
{
    double step = 0.0;
    std::size_t n_prehistory = 0;
    std::vector<double> values;
    DriverKind driver = DriverKind::gaussian;
    std::uint64_t seed = 0;

    /// Increment at grid node j (j may be negative down to −n_prehistory).
    double at(std::ptrdiff_t node) const
    {
        return values[static_cast<std::size_t>(node + static_cast<std::ptrdiff_t>(n_prehistory))];
    }
};

/// Number of increments √h·Z covering a segment of the given duration.
std::vector<double> increments_over(DriverKind kind, double step, double duration,
                                    std::uint64_t seed);

/// Independent increments √h·Z_j covering [−prehistory, T].
Increments simulate_increments(DriverKind kind, TimeGrid const& grid, double prehistory,
                               std::uint64_t seed);

enum class BasisFamily
{
    haar,
};

/// Orthonormal basis of L₂[0, horizon] used by the series construction.
struct BasisSpec
{
    BasisFamily family = BasisFamily::haar;
    std::size_t n_terms = 1024;
    double horizon = 1.0;
};

/// ∫₀ᵗ φ_k(u) du for the Haar system on [0, horizon] (index 0 is the constant).
double haar_primitive(std::size_t k, double t, double horizon) noexcept;

/// Partial sum ξ(t) = Σ_{k<n_terms} ζ_k ∫₀ᵗ φ_k at arbitrary times in [0, horizon].
std::vector<double> ito_nisio_series(BasisSpec const& basis, std::span<double const> coefficients,
                                     std::span<double const> times);

/// ξ(t_j) on the grid with i.i.d. coefficients of the given law.
std::vector<double> ito_nisio_path(DriverKind kind, BasisSpec const& basis, TimeGrid const& grid,
                                   std::uint64_t seed);

/// Increments of the two-sided series process, ξ(t) = ξ₁(t) for t >= 0 and
/// ξ₂(|t|) for t < 0, covering [−prehistory, T].
Increments ito_nisio_increments(DriverKind kind, BasisSpec const& basis, TimeGrid const& grid,
                                double prehistory, std::uint64_t seed);

struct NoisePath
{
    TimeGrid grid;
    std::vector<double> values;
    DriverKind driver = DriverKind::gaussian;
    std::optional<FilterKernel> kernel;
    std::uint64_t seed = 0;
};

/// ε(t_j) = Σ_{k·h <= H} ψ(k·h) Δξ(t_j − k·h).
NoisePath apply_filter(FilterKernel const& kernel, Increments const& increments,
                       TimeGrid const& grid);

/// White-increment mode: ε(t_j) = Δξ(t_j)/h, the discretized derivative of ξ.
NoisePath white_noise(Increments const& increments, TimeGrid const& grid);

enum class DriverProcess
{
    increments,
    ito_nisio,
};

/// Everything needed to regenerate a noise path from a seed.
struct NoiseSpec
{
    DriverKind driver = DriverKind::gaussian;
    std::optional<FilterKernel> kernel;
    std::optional<double> prehistory;
    DriverProcess process = DriverProcess::increments;
    BasisSpec basis;

    /// Requested prehistory, defaulting to the kernel's truncation horizon.
    double resolved_prehistory() const;

    /// Spectral supremum of the noise: f₀ of the kernel, 1/(2π) for white noise.
    double spectral_sup() const;
};

NoisePath simulate_noise(NoiseSpec const& spec, TimeGrid const& grid, std::uint64_t seed);

}  // namespace ssg
