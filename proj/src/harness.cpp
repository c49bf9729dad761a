#include "ssg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ssg/error.hpp"
#include "ssg/parallel.hpp"
#include "ssg/stats.hpp"

namespace ssg {

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t index) noexcept
{
    return mix64(master_seed, index);
}

TrialRecord run_trial(ExperimentSpec const& spec, std::span<double const> norming,
                      std::size_t index)
{
    TrialRecord rec;
    rec.trial_index = index;
    rec.trial_seed = trial_seed(spec.master_seed, index);

    NoisePath noise = simulate_noise(spec.noise, spec.grid, rec.trial_seed);
    if (spec.noise_scale != 1.0)
        for (auto& x : noise.values)
            x *= spec.noise_scale;
    auto const obs = make_observation(*spec.model, spec.theta_true, noise);

    try {
        auto const fit = lse_fit(obs, *spec.model, spec.fit);
        rec.theta_hat = fit.theta_hat;
        rec.converged = fit.converged;
        rec.boundary = fit.boundary;
    } catch (NonConvergence const& e) {
        rec.theta_hat = e.best_point();
        rec.converged = false;
        rec.boundary = !spec.model->box().interior(rec.theta_hat);
    }
    rec.deviation = normalized_deviation(rec.theta_hat, spec.theta_true, norming);
    return rec;
}

std::vector<TrialRecord> run_trials(ExperimentSpec const& spec, unsigned workers)
{
    if (!spec.model)
        throw ContractViolation("run_trials: no model");
    auto const norming =
        norming_diagonal(spec.norming, *spec.model, spec.theta_true, spec.grid);
    std::vector<TrialRecord> records(spec.n_trials);
    parallel_for(spec.n_trials, workers,
                 [&](std::size_t i) { records[i] = run_trial(spec, norming, i); });

    auto const failed = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](auto const& r) { return !r.converged; }));
    if (static_cast<double>(failed)
        > spec.max_failure_fraction * static_cast<double>(spec.n_trials))
        throw RunFailure("run_trials: " + std::to_string(failed) + " of "
                         + std::to_string(spec.n_trials)
                         + " fits did not converge (limit "
                         + std::to_string(spec.max_failure_fraction * 100.0) + "%)");
    return records;
}

std::vector<double> deviations(std::span<TrialRecord const> records)
{
    std::vector<double> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        out[i] = records[i].deviation;
    return out;
}

//---------------------------------------------------------------------------//
// Tails
//---------------------------------------------------------------------------//

TailEstimate estimate_tail(std::span<double const> devs, std::span<double const> R_grid,
                           BoundConstants const* consts)
{
    if (R_grid.empty())
        throw ContractViolation("estimate_tail: R_grid must not be empty");
    if (devs.size() < 100)
        throw ContractViolation("estimate_tail: need at least 100 trials");
    for (std::size_t k = 1; k < R_grid.size(); ++k)
        if (!(R_grid[k] > R_grid[k - 1]))
            throw ContractViolation("estimate_tail: R_grid must be strictly increasing");

    std::vector<double> sorted(devs.begin(), devs.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t const n = sorted.size();

    TailEstimate tail;
    tail.R_grid.assign(R_grid.begin(), R_grid.end());
    tail.n_trials = n;
    for (double R : R_grid) {
        auto const below = static_cast<std::size_t>(
            std::lower_bound(sorted.begin(), sorted.end(), R) - sorted.begin());
        std::size_t const count = n - below;
        auto const ci = clopper_pearson(count, n);
        tail.counts.push_back(count);
        tail.p_hat.push_back(static_cast<double>(count) / static_cast<double>(n));
        tail.ci_low.push_back(ci.low);
        tail.ci_high.push_back(ci.high);
        if (consts)
            tail.envelope.push_back(tail_probability_bound(*consts, R));
    }

    // Least-squares slope of −ln p̂ against R² over well-populated levels.
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t k = 0; k < R_grid.size(); ++k)
        if (tail.counts[k] >= rate_fit_min_count) {
            x.push_back(R_grid[k] * R_grid[k]);
            y.push_back(-std::log(tail.p_hat[k]));
        }
    tail.rate_levels = x.size();
    tail.fitted_rate = std::numeric_limits<double>::quiet_NaN();
    if (x.size() >= 2) {
        double const mx = mean(x);
        double const my = mean(y);
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            sxy += (x[k] - mx) * (y[k] - my);
            sxx += (x[k] - mx) * (x[k] - mx);
        }
        if (sxx > 0.0)
            tail.fitted_rate = sxy / sxx;
    }
    return tail;
}

TailEstimate estimate_tail(std::span<TrialRecord const> records, std::span<double const> R_grid,
                           BoundConstants const* consts)
{
    auto const devs = deviations(records);
    return estimate_tail(devs, R_grid, consts);
}

EnvelopeComparison compare_with_envelope(TailEstimate const& tail, BoundConstants const& consts)
{
    EnvelopeComparison cmp;
    cmp.overall = true;
    for (std::size_t k = 0; k < tail.R_grid.size(); ++k) {
        double const env = tail_probability_bound(consts, tail.R_grid[k]);
        bool const ok = tail.ci_low[k] <= env;
        cmp.envelope.push_back(env);
        cmp.level_pass.push_back(ok);
        cmp.overall = cmp.overall && ok;
    }
    cmp.rate_pass = std::isfinite(tail.fitted_rate) && tail.fitted_rate >= consts.b;
    cmp.overall = cmp.overall && cmp.rate_pass;
    return cmp;
}

CalibratedComparison calibrated_comparison(std::span<TrialRecord const> records,
                                           std::span<double const> R_grid,
                                           BoundConstants consts, double fraction)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ContractViolation("calibrated_comparison: fraction must lie in (0, 1)");
    auto const n_cal =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(records.size())));
    CalibratedComparison out;
    out.n_calibration = n_cal;
    out.training = estimate_tail(records.first(n_cal), R_grid);
    consts.B_cal = calibrate_prefactor(consts.b, R_grid, out.training.ci_high);
    out.consts = consts;
    out.evaluation = estimate_tail(records.subspan(n_cal), R_grid, &out.consts);
    out.comparison = compare_with_envelope(out.evaluation, out.consts);
    return out;
}

//---------------------------------------------------------------------------//
// MGF domination
//---------------------------------------------------------------------------//

MgfReport mgf_check(NoiseSpec const& source, std::span<double const> delta, TimeGrid const& grid,
                    double d0, std::span<double const> lambda_grid, std::uint64_t seed,
                    MgfOptions const& opts, unsigned workers)
{
    if (opts.n_rep < 10000)
        throw ContractViolation("mgf_check: need at least 10^4 replications");
    if (!(d0 > 0.0))
        throw ContractViolation("mgf_check: d0 must be positive");
    if (delta.size() != grid.size())
        throw ContractViolation("mgf_check: weight length does not match the grid");

    MgfReport report;
    report.delta_norm_sq = inner_product(delta, delta, grid);
    for (double lambda : lambda_grid) {
        double const exponent = 0.5 * lambda * lambda * d0 * report.delta_norm_sq;
        if (exponent > opts.max_exponent * (1.0 + 1e-12))
            throw ContractViolation("mgf_check: lambda = " + std::to_string(lambda)
                                    + " exceeds the estimable range (1/2 lambda^2 d0 "
                                      "||Delta||^2 <= "
                                    + std::to_string(opts.max_exponent) + ")");
    }

    std::vector<double> integrals(opts.n_rep);
    parallel_for(opts.n_rep, workers, [&](std::size_t r) {
        auto const path = simulate_noise(source, grid, mix64(seed, r));
        integrals[r] = inner_product(delta, path.values, grid);
    });
    report.sample_variance = variance(integrals);

    report.overall = true;
    std::vector<double> terms(opts.n_rep);
    std::vector<double> boot(opts.n_bootstrap);
    for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
        double const lambda = lambda_grid[l];
        double const env = std::exp(0.5 * lambda * lambda * d0 * report.delta_norm_sq);
        bool finite = true;
        for (std::size_t r = 0; r < opts.n_rep; ++r) {
            terms[r] = std::exp(lambda * integrals[r]);
            finite = finite && std::isfinite(terms[r]);
        }
        double const m = finite ? mean(terms) : std::numeric_limits<double>::infinity();

        double low = m;
        double high = m;
        if (finite && lambda != 0.0) {
            auto engine = make_engine(mix64(~seed, l));
            std::uniform_int_distribution<std::size_t> pick(0, opts.n_rep - 1);
            for (auto& b : boot) {
                double s = 0.0;
                for (std::size_t r = 0; r < opts.n_rep; ++r)
                    s += terms[pick(engine)];
                b = s / static_cast<double>(opts.n_rep);
            }
            std::sort(boot.begin(), boot.end());
            auto quantile = [&](double p) {
                double const pos = p * static_cast<double>(boot.size() - 1);
                auto const i = static_cast<std::size_t>(pos);
                double const frac = pos - static_cast<double>(i);
                return i + 1 < boot.size() ? boot[i] + frac * (boot[i + 1] - boot[i]) : boot[i];
            };
            low = 2.0 * m - quantile(0.975);
            high = 2.0 * m - quantile(0.025);
        }
        bool const ok = finite && low <= env * (1.0 + opts.slack);

        report.lambda_grid.push_back(lambda);
        report.empirical.push_back(m);
        report.band_low.push_back(low);
        report.band_high.push_back(high);
        report.envelope.push_back(env);
        report.pass.push_back(ok);
        report.overall = report.overall && ok;
    }
    return report;
}

//---------------------------------------------------------------------------//
// Covariance quadratic form
//---------------------------------------------------------------------------//

std::vector<double> random_step_function(TimeGrid const& grid, Engine& engine)
{
    std::uniform_int_distribution<int> pieces_dist(1, 8);
    std::uniform_real_distribution<double> where(0.0, grid.horizon());
    std::normal_distribution<double> height(0.0, 1.0);

    int const pieces = pieces_dist(engine);
    std::vector<double> cuts;
    for (int k = 1; k < pieces; ++k)
        cuts.push_back(where(engine));
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> heights(static_cast<std::size_t>(pieces));
    for (auto& v : heights)
        v = height(engine);

    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        auto const piece = static_cast<std::size_t>(
            std::upper_bound(cuts.begin(), cuts.end(), grid.node(j)) - cuts.begin());
        out[j] = heights[piece];
    }
    return out;
}

std::vector<double> covariance_lag_table(FilterKernel const& kernel, TimeGrid const& grid)
{
    std::vector<double> table(grid.size());
    for (std::size_t k = 0; k < table.size(); ++k)
        table[k] = covariance_of_filter(kernel, static_cast<double>(k) * grid.step());
    return table;
}

double covariance_form(std::span<double const> lag_table, std::span<double const> delta,
                       TimeGrid const& grid)
{
    if (lag_table.size() != grid.size() || delta.size() != grid.size())
        throw ContractViolation("covariance_form: lengths do not match the grid");
    std::size_t const n = grid.size();
    std::vector<double> wd(n);
    for (std::size_t j = 0; j < n; ++j)
        wd[j] = grid.weight(j) * delta[j];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // Diagonal once, off-diagonal pairs twice.
        double row = 0.5 * lag_table[0] * wd[i];
        for (std::size_t j = i + 1; j < n; ++j)
            row += lag_table[j - i] * wd[j];
        total += 2.0 * wd[i] * row;
    }
    return total;
}

QuadraticFormReport quadratic_form_check(FilterKernel const& kernel, TimeGrid const& grid,
                                         std::size_t n_probe, std::uint64_t seed)
{
    if (n_probe < 10)
        throw ContractViolation("quadratic_form_check: need at least 10 probes");
    QuadraticFormReport rep;
    rep.f0 = f0_sup(kernel).f0;
    rep.d0 = d0_from_spectral(rep.f0);

    auto const table = covariance_lag_table(kernel, grid);
    std::size_t const n = grid.size();
    double b1_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_abs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double const b = table[i > j ? i - j : j - i];
            b1_sq += grid.weight(i) * grid.weight(j) * b * b;
            row_abs += grid.weight(j) * std::abs(b);
        }
        rep.b2 = std::max(rep.b2, row_abs);
    }
    rep.b1 = std::sqrt(b1_sq);

    auto engine = make_engine(seed);
    rep.bounded = rep.nonnegative = rep.b1_bounded = rep.b2_bounded = true;
    constexpr double rel_tol = 1e-3;
    for (std::size_t p = 0; p < n_probe; ++p) {
        auto const delta = random_step_function(grid, engine);
        double const form = covariance_form(table, delta, grid);
        double const norm_sq = inner_product(delta, delta, grid);
        rep.forms.push_back(form);
        rep.norms_sq.push_back(norm_sq);
        rep.max_ratio = std::max(rep.max_ratio, form / (rep.d0 * norm_sq));
        rep.bounded = rep.bounded && form <= (1.0 + rel_tol) * rep.d0 * norm_sq;
        rep.b1_bounded = rep.b1_bounded && form <= (1.0 + 1e-12) * rep.b1 * norm_sq;
        rep.b2_bounded = rep.b2_bounded && form <= (1.0 + 1e-12) * rep.b2 * norm_sq;
        // Rounding can push an exactly-zero quadratic form slightly negative.
        rep.nonnegative = rep.nonnegative && form >= -1e-12 * table[0] * norm_sq * grid.horizon();
    }
    rep.pass = rep.bounded && rep.nonnegative && rep.b1_bounded && rep.b2_bounded;
    return rep;
}

}  // namespace ssg
