#include "ssg/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "ssg/error.hpp"

namespace ssg {

Observation::Observation(TimeGrid grid_, std::vector<double> x_values_,
                         std::optional<Provenance> provenance_)
  : grid(grid_), x_values(std::move(x_values_)), provenance(std::move(provenance_))
{
    if (x_values.size() != grid.size())
        throw ContractViolation("Observation: expected " + std::to_string(grid.size())
                                + " values, got " + std::to_string(x_values.size()));
    for (std::size_t j = 0; j < x_values.size(); ++j)
        if (!std::isfinite(x_values[j]))
            throw ContractViolation("Observation: non-finite value at node " + std::to_string(j));
}

Observation make_observation(RegressionModel const& model, std::span<double const> theta_true,
                             NoisePath const& noise)
{
    model.box().require_contains(theta_true, "make_observation");
    auto x = model.evaluate(noise.grid, theta_true);
    for (std::size_t j = 0; j < x.size(); ++j)
        x[j] += noise.values[j];
    return Observation(noise.grid, std::move(x),
                       Observation::Provenance{{theta_true.begin(), theta_true.end()}, noise.seed});
}

namespace {

// Q_T without the box check; used inside the search where points are clamped.
double raw_objective(Observation const& obs, RegressionModel const& model,
                     std::span<double const> tau)
{
    TimeGrid const& grid = obs.grid;
    std::size_t const n = grid.n_steps();
    double interior = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        double const r = obs.x_values[j] - model.eval(grid.node(j), tau);
        interior += r * r;
    }
    double const r0 = obs.x_values[0] - model.eval(grid.node(0), tau);
    double const rn = obs.x_values[n] - model.eval(grid.node(n), tau);
    return grid.step() * (interior + 0.5 * (r0 * r0 + rn * rn));
}

struct NormalEquations
{
    Eigen::MatrixXd lhs;
    Eigen::VectorXd rhs;
};

NormalEquations normal_equations(Observation const& obs, RegressionModel const& model,
                                 std::span<double const> tau)
{
    auto const q = static_cast<Eigen::Index>(model.dimension());
    NormalEquations ne{Eigen::MatrixXd::Zero(q, q), Eigen::VectorXd::Zero(q)};
    Eigen::VectorXd g(q);
    for (std::size_t j = 0; j < obs.grid.size(); ++j) {
        double const t = obs.grid.node(j);
        double const w = obs.grid.weight(j);
        model.grad(t, tau, std::span<double>(g.data(), static_cast<std::size_t>(q)));
        double const r = obs.x_values[j] - model.eval(t, tau);
        ne.lhs.noalias() += w * g * g.transpose();
        ne.rhs.noalias() += (w * r) * g;
    }
    return ne;
}

// Gauss-Newton direction restricted to the coordinates not pinned at a bound.
Eigen::VectorXd projected_direction(NormalEquations const& ne, ParameterBox const& box,
                                    std::span<double const> tau)
{
    auto const q = ne.rhs.size();
    std::vector<bool> fixed(static_cast<std::size_t>(q), false);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(q);
    for (Eigen::Index round = 0; round <= q; ++round) {
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < q; ++i)
            if (!fixed[static_cast<std::size_t>(i)])
                free.push_back(i);
        delta.setZero();
        if (free.empty())
            return delta;
        auto const m = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd a(m, m);
        Eigen::VectorXd b(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            b(r) = ne.rhs(free[r]);
            for (Eigen::Index c = 0; c < m; ++c)
                a(r, c) = ne.lhs(free[r], free[c]);
        }
        double const damping = 1e-14 * std::max(a.trace(), std::numeric_limits<double>::min());
        a.diagonal().array() += damping;
        Eigen::VectorXd const step = a.ldlt().solve(b);
        for (Eigen::Index r = 0; r < m; ++r)
            delta(free[r]) = step(r);

        bool changed = false;
        for (Eigen::Index i = 0; i < q; ++i) {
            auto const k = static_cast<std::size_t>(i);
            if (fixed[k])
                continue;
            double const pad = 1e-12 * box.width(k);
            bool const at_lower = tau[k] <= box.lower()[k] + pad && delta(i) < 0.0;
            bool const at_upper = tau[k] >= box.upper()[k] - pad && delta(i) > 0.0;
            if (at_lower || at_upper) {
                fixed[k] = true;
                changed = true;
            }
        }
        if (!changed)
            return delta;
    }
    return delta;
}

struct LocalResult
{
    std::vector<double> tau;
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

LocalResult refine(Observation const& obs, RegressionModel const& model,
                   std::vector<double> start, double start_value, LseOptions const& opts)
{
    auto const& box = model.box();
    double const tol = opts.local_tol * box.diameter();
    LocalResult res{std::move(start), start_value, false, 0};
    std::vector<double> trial(res.tau.size());

    for (; res.iterations < opts.max_iter; ++res.iterations) {
        auto const ne = normal_equations(obs, model, res.tau);
        Eigen::VectorXd const delta = projected_direction(ne, box, res.tau);
        if (!delta.allFinite())
            return res;
        if (delta.norm() <= tol) {
            res.converged = true;
            return res;
        }

        bool accepted = false;
        double alpha = 1.0;
        for (int halving = 0; halving < 50; ++halving, alpha *= 0.5) {
            for (std::size_t i = 0; i < trial.size(); ++i)
                trial[i] = res.tau[i] + alpha * delta(static_cast<Eigen::Index>(i));
            trial = box.clamp(trial);
            double const value = raw_objective(obs, model, trial);
            if (std::isfinite(value) && value < res.value) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // A descent direction that cannot lower Q even at scale 2⁻⁵⁰ marks a
            // numerically stationary point.
            res.converged = true;
            return res;
        }

        double step2 = 0.0;
        for (std::size_t i = 0; i < trial.size(); ++i)
            step2 += (trial[i] - res.tau[i]) * (trial[i] - res.tau[i]);
        res.tau = trial;
        res.value = raw_objective(obs, model, res.tau);
        if (std::sqrt(step2) < tol) {
            res.converged = true;
            ++res.iterations;
            return res;
        }
    }
    return res;
}

}  // namespace

double objective(Observation const& obs, RegressionModel const& model,
                 std::span<double const> tau)
{
    model.box().require_contains(tau, "objective");
    return raw_objective(obs, model, tau);
}

std::vector<double> objective_gradient(Observation const& obs, RegressionModel const& model,
                                       std::span<double const> tau)
{
    model.box().require_contains(tau, "objective_gradient");
    auto const ne = normal_equations(obs, model, tau);
    std::vector<double> out(model.dimension());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = -2.0 * ne.rhs(static_cast<Eigen::Index>(i));
    return out;
}

LseResult lse_fit(Observation const& obs, RegressionModel const& model, LseOptions const& opts)
{
    if (opts.coarse_grid_per_dim < 3)
        throw ContractViolation("lse_fit: coarse_grid_per_dim must be at least 3");
    if (opts.n_starts == 0)
        throw ContractViolation("lse_fit: n_starts must be at least 1");
    auto const& box = model.box();
    std::size_t const q = model.dimension();
    std::size_t const m = opts.coarse_grid_per_dim;

    std::size_t n_lattice = 1;
    for (std::size_t i = 0; i < q; ++i)
        n_lattice *= m;

    // Row-major enumeration: the first coordinate is most significant, so
    // enumeration order is lexicographic order of the parameter.
    std::vector<std::vector<double>> points(n_lattice, std::vector<double>(q));
    std::vector<double> values(n_lattice);
    for (std::size_t idx = 0; idx < n_lattice; ++idx) {
        std::size_t rest = idx;
        for (std::size_t i = q; i-- > 0;) {
            std::size_t const k = rest % m;
            rest /= m;
            points[idx][i] = k + 1 == m ? box.upper()[i]
                                        : box.lower()[i] + box.width(i) * static_cast<double>(k)
                                                               / static_cast<double>(m - 1);
        }
        values[idx] = raw_objective(obs, model, points[idx]);
        if (!std::isfinite(values[idx]))
            throw DataError("lse_fit: non-finite objective at lattice point "
                            + std::to_string(idx));
    }

    std::vector<std::size_t> order(n_lattice);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double const best_lattice = values[order.front()];

    LseResult result;
    result.lattice_ties = static_cast<std::size_t>(std::count_if(
        values.begin(), values.end(),
        [&](double v) { return v <= best_lattice + 1e-10 * (1.0 + std::abs(best_lattice)); }));

    std::size_t const n_starts = std::min(opts.n_starts, n_lattice);
    bool have = false;
    for (std::size_t s = 0; s < n_starts; ++s) {
        std::size_t const idx = order[s];
        auto local = refine(obs, model, points[idx], values[idx], opts);
        result.iterations += local.iterations;
        ++result.n_restarts;
        if (!local.converged)
            continue;
        if (!have || local.value < result.q_value) {
            result.theta_hat = std::move(local.tau);
            result.q_value = local.value;
            have = true;
        }
    }
    if (!have)
        throw NonConvergence("lse_fit: no local refinement converged within "
                                 + std::to_string(opts.max_iter) + " iterations",
                             points[order.front()], best_lattice);

    result.converged = true;
    for (std::size_t i = 0; i < q; ++i) {
        double const pad = 1e-8 * box.width(i);
        if (result.theta_hat[i] <= box.lower()[i] + pad
            || result.theta_hat[i] >= box.upper()[i] - pad)
            result.boundary = true;
    }
    return result;
}

double normalized_deviation(std::span<double const> theta_hat, std::span<double const> theta_true,
                            std::span<double const> norming)
{
    if (theta_hat.size() != theta_true.size() || theta_hat.size() != norming.size())
        throw ContractViolation("normalized_deviation: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < theta_hat.size(); ++i) {
        double const d = norming[i] * (theta_hat[i] - theta_true[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

}  // namespace ssg
