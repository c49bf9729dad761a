#include "ssg/numerics.hpp"

#include <cmath>
#include <string>

#include "ssg/error.hpp"

namespace ssg {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps)
  : horizon_(horizon), n_steps_(n_steps), step_(0.0)
{
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ContractViolation("TimeGrid: horizon must be positive and finite, got "
                                + std::to_string(horizon));
    if (n_steps == 0)
        throw ContractViolation("TimeGrid: n_steps must be positive");
    step_ = horizon / static_cast<double>(n_steps);
}

TimeGrid TimeGrid::with_max_step(double horizon, double max_step)
{
    if (!(max_step > 0.0))
        throw ContractViolation("TimeGrid: max_step must be positive");
    auto n = static_cast<std::size_t>(std::ceil(horizon / max_step - 1e-9));
    return TimeGrid(horizon, n == 0 ? 1 : n);
}

std::vector<double> TimeGrid::nodes() const
{
    std::vector<double> out(size());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = node(j);
    return out;
}

namespace {

void check_values(std::span<double const> values, TimeGrid const& grid, char const* what)
{
    if (values.size() != grid.size())
        throw ContractViolation(std::string(what) + ": expected " + std::to_string(grid.size())
                                + " values, got " + std::to_string(values.size()));
    for (std::size_t j = 0; j < values.size(); ++j)
        if (!std::isfinite(values[j]))
            throw ContractViolation(std::string(what) + ": non-finite value at node "
                                    + std::to_string(j));
}

}  // namespace

double integrate(std::span<double const> values, TimeGrid const& grid)
{
    check_values(values, grid, "integrate");
    double interior = 0.0;
    for (std::size_t j = 1; j + 1 < values.size(); ++j)
        interior += values[j];
    return grid.step() * (interior + 0.5 * (values.front() + values.back()));
}

double inner_product(std::span<double const> f, std::span<double const> g, TimeGrid const& grid)
{
    check_values(f, grid, "inner_product");
    check_values(g, grid, "inner_product");
    double interior = 0.0;
    for (std::size_t j = 1; j + 1 < f.size(); ++j)
        interior += f[j] * g[j];
    return grid.step() * (interior + 0.5 * (f.front() * g.front() + f.back() * g.back()));
}

std::vector<double> tabulate(std::function<double(double)> const& fn, TimeGrid const& grid)
{
    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = fn(grid.node(j));
    return out;
}

double integrate_function(std::function<double(double)> const& fn, double lower, double upper,
                          std::size_t n_panels)
{
    if (n_panels == 0)
        throw ContractViolation("integrate_function: n_panels must be positive");
    if (upper <= lower)
        return 0.0;
    double const h = (upper - lower) / static_cast<double>(n_panels);
    double sum = 0.5 * (fn(lower) + fn(upper));
    for (std::size_t i = 1; i < n_panels; ++i)
        sum += fn(lower + h * static_cast<double>(i));
    return h * sum;
}

}  // namespace ssg
