#include "ssg/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace ssg {

namespace {

std::string slack_message(double beta, double max_beta)
{
    std::ostringstream os;
    os.precision(17);
    os << "slack too large: beta = " << beta
       << " leaves a nonpositive rate; the maximal admissible beta is " << max_beta
       << " (exclusive)";
    return os.str();
}

void require_positive(double value, char const* what)
{
    if (!(value > 0.0) || !std::isfinite(value))
        throw ContractViolation(std::string(what) + " must be positive and finite");
}

}  // namespace

SlackTooLarge::SlackTooLarge(double beta, double max_beta)
  : Error(slack_message(beta, max_beta)), max_beta_(max_beta)
{}

double unslacked_rate(std::size_t q, double c0, double d0)
{
    if (q == 0)
        throw ContractViolation("rate: q must be at least 1");
    require_positive(c0, "rate: c0");
    require_positive(d0, "rate: d0");
    return c0 / (8.0 * d0 * (1.0 + static_cast<double>(q)));
}

double default_beta(std::size_t q, double c0, double d0)
{
    return 1e-3 * unslacked_rate(q, c0, d0);
}

double exponent_rate(std::size_t q, double c0, double d0, double beta)
{
    double const base = unslacked_rate(q, c0, d0);
    if (!(beta >= 0.0))
        throw ContractViolation("rate: beta must be nonnegative");
    double const b = base - beta;
    if (!(b > 0.0))
        throw SlackTooLarge(beta, base);
    return b;
}

double stationary_rate(std::size_t q, double c0, double f0, double beta)
{
    if (q == 0)
        throw ContractViolation("rate: q must be at least 1");
    require_positive(c0, "rate: c0");
    require_positive(f0, "rate: f0");
    if (!(beta >= 0.0))
        throw ContractViolation("rate: beta must be nonnegative");
    double const base = c0 / (16.0 * std::numbers::pi * f0 * (1.0 + static_cast<double>(q)));
    double const b = base - beta;
    if (!(b > 0.0))
        throw SlackTooLarge(beta, base);
    return b;
}

BoundConstants make_bound_constants(std::size_t q, double c0, double d0,
                                    std::optional<double> beta, double B_cal)
{
    require_positive(B_cal, "B_cal");
    BoundConstants c;
    c.q = q;
    c.c0 = c0;
    c.d0 = d0;
    c.beta = beta ? *beta : default_beta(q, c0, d0);
    c.b = exponent_rate(q, c0, d0, c.beta);
    c.B_cal = B_cal;
    return c;
}

BoundConstants make_stationary_constants(std::size_t q, double c0, double f0,
                                         std::optional<double> beta, double B_cal)
{
    require_positive(f0, "f0");
    auto c = make_bound_constants(q, c0, 2.0 * std::numbers::pi * f0, beta, B_cal);
    c.f0 = f0;
    c.b = stationary_rate(q, c0, f0, c.beta);
    return c;
}

double gaussian_integral_tail(double d0, double delta_norm_sq, double x)
{
    require_positive(d0, "gaussian_integral_tail: d0");
    require_positive(delta_norm_sq, "gaussian_integral_tail: ||Delta||^2");
    if (!(x >= 0.0))
        throw ContractViolation("gaussian_integral_tail: x must be nonnegative");
    return std::exp(-x * x / (2.0 * d0 * delta_norm_sq));
}

double tail_envelope(BoundConstants const& consts, double R)
{
    if (!(R >= 0.0))
        throw ContractViolation("tail_envelope: R must be nonnegative");
    return consts.B_cal * std::exp(-consts.b * R * R);
}

double tail_probability_bound(BoundConstants const& consts, double R)
{
    return std::min(1.0, tail_envelope(consts, R));
}

double consistency_envelope(BoundConstants const& consts, double rho, double nu, double T)
{
    if (!(rho > 0.0))
        throw ContractViolation("consistency_envelope: rho must be positive");
    if (!(nu >= 0.0 && nu < 0.5))
        throw ContractViolation("consistency_envelope: nu must lie in [0, 1/2)");
    require_positive(T, "consistency_envelope: T");
    return consts.B_cal * std::exp(-consts.b * rho * rho * std::pow(T, 1.0 - 2.0 * nu));
}

double moderate_deviation_envelope(BoundConstants const& consts, double h, double T)
{
    require_positive(h, "moderate_deviation_envelope: h");
    if (!(T > 1.0))
        throw ContractViolation("moderate_deviation_envelope: T must exceed 1 (ln T > 0)");
    return consts.B_cal * std::pow(T, -consts.b * h * h);
}

double calibrate_prefactor(double b, std::span<double const> R_grid,
                           std::span<double const> p_hat)
{
    if (R_grid.size() != p_hat.size() || R_grid.empty())
        throw ContractViolation("calibrate_prefactor: need matching, nonempty levels");
    double B = 0.0;
    for (std::size_t k = 0; k < R_grid.size(); ++k)
        B = std::max(B, p_hat[k] * std::exp(b * R_grid[k] * R_grid[k]));
    // An all-zero training tail would give B = 0; keep the prefactor positive.
    return B > 0.0 ? B : std::numeric_limits<double>::min();
}

}  // namespace ssg
