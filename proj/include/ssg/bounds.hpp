#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "ssg/error.hpp"

namespace ssg {

/// Raised when the slack β leaves no positive rate.
class SlackTooLarge : public Error
{
  public:
    SlackTooLarge(double beta, double max_beta);
    double max_beta() const noexcept { return max_beta_; }

  private:
    double max_beta_;
};

/*!
 * Constants of the large-deviation envelope B_cal·exp{−b R²}.
 *
 * The rate is b = c₀/(8 d₀ (1+q)) − β; with a spectral bound, d₀ = 2π f₀.
 * The prefactor is not pinned down by the theory and is carried as a
 * calibration constant (default 1).
 */
struct BoundConstants
{
    std::size_t q = 1;
    double c0 = 0.0;
    double d0 = 0.0;
    std::optional<double> f0;
    double beta = 0.0;
    double b = 0.0;
    double B_cal = 1.0;
};

/// Rate before slack, c₀/(8 d₀ (1+q)).
double unslacked_rate(std::size_t q, double c0, double d0);

/// 1e-3 of the unslacked rate.
double default_beta(std::size_t q, double c0, double d0);

/// b = c₀/(8 d₀ (1+q)) − β.
double exponent_rate(std::size_t q, double c0, double d0, double beta);

/// b = c₀/(16 π f₀ (1+q)) − β.
double stationary_rate(std::size_t q, double c0, double f0, double beta);

/// Builds consistent constants; β defaults to default_beta.
BoundConstants make_bound_constants(std::size_t q, double c0, double d0,
                                    std::optional<double> beta = std::nullopt,
                                    double B_cal = 1.0);

/// Stationary variant with d₀ = 2π f₀.
BoundConstants make_stationary_constants(std::size_t q, double c0, double f0,
                                         std::optional<double> beta = std::nullopt,
                                         double B_cal = 1.0);

/// G_T(x) = exp{−x²/(2 d₀ ‖Δ‖²_T)}; P{|I(T)| >= x} <= 2 G_T(x).
double gaussian_integral_tail(double d0, double delta_norm_sq, double x);

/// B_cal·exp{−b R²} (unclipped).
double tail_envelope(BoundConstants const& consts, double R);

/// min(1, tail_envelope).
double tail_probability_bound(BoundConstants const& consts, double R);

/// B_cal·exp{−b ρ² T^{1−2ν}}: the envelope at R = ρ T^{1/2−ν}.
double consistency_envelope(BoundConstants const& consts, double rho, double nu, double T);

/// B_cal·T^{−b h²}: the envelope at R = h (ln T)^{1/2}.
double moderate_deviation_envelope(BoundConstants const& consts, double h, double T);

/// Smallest B making B·exp{−b R_k²} >= p_k for every level.
double calibrate_prefactor(double b, std::span<double const> R_grid,
                           std::span<double const> p_hat);

/// Recorded alongside every consistency-envelope result.
inline constexpr std::string_view consistency_exponent_note =
    "consistency envelope uses exp{-b*rho^2*T^(1-2nu)}, obtained by substituting "
    "R = rho*T^(1/2-nu) into B*exp{-b*R^2}; a first-power rho form does not follow "
    "from that substitution";

}  // namespace ssg
