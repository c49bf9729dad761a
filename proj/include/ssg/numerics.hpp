#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ssg {

/// Uniform discretization of [0, T]. Every integral in the toolkit is a
/// composite trapezoid sum over one of these.
class TimeGrid
{
  public:
    static constexpr double default_max_step = 0.01;

    TimeGrid(double horizon, std::size_t n_steps);

    /// Smallest number of steps with h <= max_step.
    static TimeGrid with_max_step(double horizon, double max_step = default_max_step);

    double horizon() const noexcept { return horizon_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t size() const noexcept { return n_steps_ + 1; }
    double step() const noexcept { return step_; }

    /// t_j = T·j/n, so t_0 = 0 and t_n = T exactly.
    double node(std::size_t j) const noexcept
    {
        return j == n_steps_ ? horizon_
                             : horizon_ * static_cast<double>(j) / static_cast<double>(n_steps_);
    }

    std::vector<double> nodes() const;

    /// Trapezoid weight of node j (h/2 at the ends, h inside).
    double weight(std::size_t j) const noexcept
    {
        return (j == 0 || j == n_steps_) ? 0.5 * step_ : step_;
    }

    bool operator==(TimeGrid const& other) const noexcept
    {
        return horizon_ == other.horizon_ && n_steps_ == other.n_steps_;
    }

  private:
    double horizon_;
    std::size_t n_steps_;
    double step_;
};

/// Composite trapezoid approximation of ∫₀ᵀ values(t) dt.
double integrate(std::span<double const> values, TimeGrid const& grid);

/// Trapezoid L₂[0,T] pairing ∫ f·g dt.
double inner_product(std::span<double const> f, std::span<double const> g, TimeGrid const& grid);

/// Samples fn at every grid node.
std::vector<double> tabulate(std::function<double(double)> const& fn, TimeGrid const& grid);

/// Trapezoid rule on [lower, upper] with n panels for a callable integrand.
double integrate_function(std::function<double(double)> const& fn, double lower, double upper,
                          std::size_t n_panels);

}  // namespace ssg
