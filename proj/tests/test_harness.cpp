#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ssg/error.hpp"
#include "ssg/harness.hpp"
#include "ssg/stats.hpp"

using namespace ssg;
using std::numbers::pi;

namespace {

ExperimentSpec linear_white(std::size_t n_trials, double T = 4.0)
{
    ExperimentSpec spec;
    spec.model = std::make_shared<LinearModel>(ParameterBox({-1.0}, {3.0}));
    spec.theta_true = {1.0};
    spec.grid = TimeGrid::with_max_step(T);
    spec.norming = NormingMode::d_T;
    spec.n_trials = n_trials;
    spec.master_seed = 31;
    return spec;
}

// P(X <= k) for X ~ Binomial(n, p), summed term by term in log space.
double binomial_cdf(std::size_t k, std::size_t n, double p)
{
    double s = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        double const lchoose = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
        s += std::exp(lchoose + i * std::log(p) + (n - i) * std::log1p(-p));
    }
    return s;
}

// Clopper–Pearson limits from the binomial tails by bisection.
Interval cp_oracle(std::size_t k, std::size_t n)
{
    Interval out{0.0, 1.0};
    auto solve = [](auto f) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            double const mid = 0.5 * (lo + hi);
            (f(mid) ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    if (k > 0)  // P(X >= k; p) = 0.025
        out.low = solve([&](double p) { return 1.0 - binomial_cdf(k - 1, n, p) < 0.025; });
    if (k < n)  // P(X <= k; p) = 0.025
        out.high = solve([&](double p) { return binomial_cdf(k, n, p) > 0.025; });
    return out;
}

std::vector<double> half_normal(std::size_t n, std::uint64_t seed)
{
    auto engine = make_engine(seed);
    std::normal_distribution<double> z;
    std::vector<double> out(n);
    for (double& v : out)
        v = std::abs(z(engine));
    return out;
}

}  // namespace

TEST_CASE("trial seeds are a pure function of master seed and index")
{
    CHECK(trial_seed(5, 17) == trial_seed(5, 17));
    CHECK(trial_seed(5, 17) != trial_seed(5, 18));
    CHECK(trial_seed(5, 17) != trial_seed(6, 17));
}

TEST_CASE("zero-noise trials recover the parameter")
{
    auto spec = linear_white(50);
    spec.noise_scale = 0.0;
    for (auto const& r : run_trials(spec)) {
        REQUIRE(r.deviation < 1e-5);
        REQUIRE(r.converged);
    }
    ExperimentSpec es;
    es.model = std::make_shared<ExponentialModel>(ParameterBox({-0.5, -0.5}, {0.5, 0.5}),
                                                  std::make_shared<CosineRegressors>(2, 1.0));
    es.theta_true = {0.2, -0.1};
    es.grid = TimeGrid(10.0, 1000);
    es.noise.kernel = FilterKernel::exponential(1.0);
    es.noise_scale = 0.0;
    es.n_trials = 10;
    for (auto const& r : run_trials(es))
        REQUIRE(r.deviation < 1e-5);
}

TEST_CASE("trials are reproducible and independent of worker count")
{
    auto spec = linear_white(200);
    spec.noise.kernel = FilterKernel::exponential(1.0);
    auto const a = run_trials(spec, 1);
    auto const b = run_trials(spec, 1);
    auto const c = run_trials(spec, 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].trial_index == i);
        REQUIRE(a[i].trial_seed == trial_seed(spec.master_seed, i));
        REQUIRE(a[i].theta_hat == b[i].theta_hat);
        REQUIRE(a[i].theta_hat == c[i].theta_hat);
        REQUIRE(a[i].deviation == c[i].deviation);
    }
}

TEST_CASE("white Gaussian linear deviations follow the half-normal law")
{
    auto const records = run_trials(linear_white(10000));
    auto const dev = deviations(records);
    double const m = mean(dev);
    double const se = std::sqrt(variance(dev) / dev.size());
    CHECK(std::abs(m - std::sqrt(2 / pi)) < 3 * se);
}

TEST_CASE("too many failed fits fail the run")
{
    auto spec = linear_white(100);
    spec.fit.max_iter = 0;
    auto records = std::vector<TrialRecord>{};
    CHECK_THROWS_AS(run_trials(spec), RunFailure);
    spec.max_failure_fraction = 1.0;
    records = run_trials(spec);
    CHECK(std::none_of(records.begin(), records.end(), [](auto const& r) { return r.converged; }));
}

TEST_CASE("Clopper-Pearson limits")
{
    auto const zero = clopper_pearson(0, 100);
    CHECK(zero.low == 0.0);
    CHECK(zero.high == doctest::Approx(1 - std::pow(0.025, 0.01)).epsilon(1e-12));
    CHECK(zero.high == doctest::Approx(0.0362).epsilon(1e-3));
    auto const all = clopper_pearson(100, 100);
    CHECK(all.high == 1.0);
    CHECK(all.low == doctest::Approx(std::pow(0.025, 0.01)).epsilon(1e-12));
    for (auto [k, n] : {std::pair{1ul, 100ul}, {7ul, 50ul}, {50ul, 100ul}, {333ul, 1000ul}, {999ul, 1000ul}}) {
        auto const ci = clopper_pearson(k, n);
        auto const oracle = cp_oracle(k, n);
        CHECK(ci.low == doctest::Approx(oracle.low).epsilon(1e-9));
        CHECK(ci.high == doctest::Approx(oracle.high).epsilon(1e-9));
    }
    CHECK_THROWS_AS(clopper_pearson(5, 4), ContractViolation);
}

TEST_CASE("property: Clopper-Pearson coverage")
{
    auto engine = make_engine(2024);
    for (double p : {0.01, 0.1, 0.5}) {
        std::binomial_distribution<std::size_t> binom(200, p);
        int covered = 0;
        for (int rep = 0; rep < 1000; ++rep) {
            auto const ci = clopper_pearson(binom(engine), 200);
            covered += (ci.low <= p && p <= ci.high) ? 1 : 0;
        }
        CHECK(covered >= 930);
    }
}

TEST_CASE("binomial band")
{
    auto const band = binomial_band(1000, 0.3);
    CHECK(band.low < 300);
    CHECK(band.high > 300);
    CHECK(binomial_cdf(band.high, 1000, 0.3) >= 0.975);
    CHECK(binomial_cdf(band.low - 1, 1000, 0.3) <= 0.025);
}

TEST_CASE("tail estimate structure")
{
    auto const dev = half_normal(5000, 1);
    std::vector<double> const R{0.0, 0.5, 1.0, 2.0, 3.0, 10.0};
    auto const tail = estimate_tail(dev, R);
    CHECK(tail.n_trials == 5000);
    CHECK(tail.counts[0] == 5000);
    CHECK(tail.p_hat[0] == 1.0);
    CHECK(tail.counts.back() == 0);
    CHECK(tail.p_hat.back() == 0.0);
    CHECK(tail.envelope.empty());
    for (std::size_t k = 0; k < R.size(); ++k) {
        if (k > 0)
            CHECK(tail.counts[k] <= tail.counts[k - 1]);
        CHECK(tail.p_hat[k] == static_cast<double>(tail.counts[k]) / 5000.0);
        CHECK(tail.ci_low[k] <= tail.p_hat[k]);
        CHECK(tail.p_hat[k] <= tail.ci_high[k]);
    }
    // direct count oracle
    for (std::size_t k = 0; k < R.size(); ++k)
        CHECK(tail.counts[k] == static_cast<std::size_t>(std::count_if(dev.begin(), dev.end(), [&](double d) { return d >= R[k]; })));
}

TEST_CASE("tail estimate: zero of one hundred")
{
    std::vector<double> dev(100, 0.1);
    auto const tail = estimate_tail(dev, std::vector{1.0});
    CHECK(tail.p_hat[0] == 0.0);
    CHECK(tail.ci_high[0] == doctest::Approx(0.0362).epsilon(1e-3));
}

TEST_CASE("tail estimate preconditions")
{
    auto const dev = half_normal(100, 2);
    CHECK_THROWS_AS(estimate_tail(std::span(dev).first(99), std::vector{1.0}), ContractViolation);
    CHECK_THROWS_AS(estimate_tail(dev, std::vector<double>{}), ContractViolation);
    CHECK_THROWS_AS(estimate_tail(dev, std::vector{2.0, 1.0}), ContractViolation);
}

TEST_CASE("property: aggregation ignores record order")
{
    auto dev = half_normal(3000, 3);
    std::vector<double> const R{0.5, 1.0, 1.5, 2.0, 2.5};
    auto const consts = make_bound_constants(1, 1.0, 1.0);
    auto const a = estimate_tail(dev, R, &consts);
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 5; ++rep) {
        std::shuffle(dev.begin(), dev.end(), rng);
        auto const b = estimate_tail(dev, R, &consts);
        CHECK(a.counts == b.counts);
        CHECK(a.p_hat == b.p_hat);
        CHECK(a.ci_low == b.ci_low);
        CHECK(a.ci_high == b.ci_high);
        CHECK(a.envelope == b.envelope);
        CHECK(a.fitted_rate == b.fitted_rate);
    }
}

TEST_CASE("fitted rate of half-normal deviations")
{
    std::vector<double> const R{1.0, 1.5, 2.0, 2.5, 3.0};
    // least-squares slope of the exact half-normal tail on this grid
    std::vector<double> x, y;
    for (double r : R) {
        x.push_back(r * r);
        y.push_back(-std::log(std::erfc(r / std::sqrt(2.0))));
    }
    double const mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < R.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
    }
    double const exact_slope = sxy / sxx;
    CHECK(exact_slope == doctest::Approx(0.5921).epsilon(1e-3));

    auto const tail = estimate_tail(half_normal(100000, 4), R);
    CHECK(tail.rate_levels == 5);
    CHECK(std::abs(tail.fitted_rate - exact_slope) < 0.03);

    auto const big = estimate_tail(half_normal(1000000, 5), R);
    CHECK(big.fitted_rate >= 0.40);
    CHECK(big.fitted_rate <= 0.60);

    std::vector<double> few(200, 0.5);
    CHECK(std::isnan(estimate_tail(few, std::vector{1.0, 2.0}).fitted_rate));
}

TEST_CASE("envelope comparison verdicts")
{
    auto const dev = half_normal(20000, 5);
    std::vector<double> const R{0.5, 1.0, 1.5, 2.0, 2.5};
    auto consts = make_bound_constants(1, 1.0, 1.0, 0.0);  // b = 1/16
    auto const raw = estimate_tail(dev, R);
    consts.B_cal = calibrate_prefactor(consts.b, R, raw.p_hat);
    auto const cmp = compare_with_envelope(estimate_tail(dev, R, &consts), consts);
    for (bool ok : cmp.level_pass)
        CHECK(ok);
    CHECK(cmp.rate_pass);
    CHECK(cmp.overall);

    std::vector<double> adversarial(500, 10.0);
    auto strict = make_bound_constants(1, 1.0, 1.0, 0.0);
    auto const bad = compare_with_envelope(estimate_tail(adversarial, R, &strict), strict);
    for (std::size_t k = 0; k < R.size(); ++k)
        CHECK_FALSE(bad.level_pass[k]);
    CHECK_FALSE(bad.overall);
}

TEST_CASE("calibration uses a disjoint training prefix")
{
    auto const dev = half_normal(2000, 6);
    std::vector<TrialRecord> records(dev.size());
    for (std::size_t i = 0; i < dev.size(); ++i) {
        records[i].trial_index = i;
        records[i].deviation = dev[i];
        records[i].converged = true;
    }
    std::vector<double> const R{0.5, 1.0, 1.5, 2.0};
    auto const consts = make_bound_constants(1, 1.0, 1.0, 0.0);
    auto const cal = calibrated_comparison(records, R, consts, 0.1);
    CHECK(cal.n_calibration == 200);
    CHECK(cal.training.n_trials == 200);
    CHECK(cal.evaluation.n_trials == 1800);
    auto const train = estimate_tail(std::span(dev).first(200), R);
    CHECK(cal.training.counts == train.counts);
    CHECK(cal.consts.B_cal == calibrate_prefactor(consts.b, R, train.ci_high));
    for (std::size_t k = 0; k < R.size(); ++k)
        CHECK(tail_envelope(cal.consts, R[k]) >= train.ci_high[k] * (1 - 1e-15));
    CHECK(cal.comparison.overall);
    CHECK_THROWS_AS(calibrated_comparison(records, R, consts, 1.0), ContractViolation);
}

TEST_CASE("MGF check: white Gaussian noise against its exact law")
{
    TimeGrid const grid(2.0, 200);
    NoiseSpec source;
    std::vector<double> const delta(grid.size(), 1.0);
    std::vector<double> const lambda{0.0, 0.25, 0.5, 1.0, 1.4};
    auto const rep = mgf_check(source, delta, grid, 1.0, lambda, 3);
    CHECK(rep.empirical[0] == 1.0);
    CHECK(rep.pass[0]);
    CHECK(rep.overall);
    CHECK(rep.delta_norm_sq == doctest::Approx(2.0));
    CHECK(rep.sample_variance == doctest::Approx(2.0).epsilon(0.05));
    for (std::size_t l = 0; l < lambda.size(); ++l) {
        double const exact = std::exp(0.5 * lambda[l] * lambda[l] * 2.0);
        CHECK(rep.envelope[l] == doctest::Approx(exact));
        double const width = rep.band_high[l] - rep.band_low[l];
        CHECK(std::abs(rep.empirical[l] - exact) <= width + 1e-12);
    }
}

TEST_CASE("MGF check: negative control and range guard")
{
    TimeGrid const grid(1.0, 100);
    NoiseSpec source;
    source.driver = DriverKind::centered_exponential;
    std::vector<double> spike(grid.size(), 0.0);
    spike[50] = 1.0;
    double const norm_sq = inner_product(spike, spike, grid);
    double const lambda_max = std::sqrt(8.0 / norm_sq);
    std::vector<double> lambda;
    for (int i = 0; i <= 8; ++i)
        lambda.push_back(lambda_max * i / 8.0);
    auto const rep = mgf_check(source, spike, grid, 1.0, lambda, 4);
    CHECK_FALSE(rep.overall);
    CHECK(rep.pass[0]);

    source.driver = DriverKind::rademacher;
    CHECK(mgf_check(source, spike, grid, 1.0, lambda, 4).overall);

    CHECK_THROWS_AS(mgf_check(source, spike, grid, 1.0, std::vector{lambda_max * 1.1}, 4), ContractViolation);
    MgfOptions few;
    few.n_rep = 100;
    CHECK_THROWS_AS(mgf_check(source, spike, grid, 1.0, lambda, 4, few), ContractViolation);
}

TEST_CASE("MGF check is independent of worker count")
{
    TimeGrid const grid(3.0, 300);
    NoiseSpec source;
    source.driver = DriverKind::uniform_sqrt3;
    source.kernel = FilterKernel::exponential(1.0);
    std::vector<double> const delta(grid.size(), 1.0);
    std::vector<double> const lambda{0.0, 0.3, 0.6};
    auto const a = mgf_check(source, delta, grid, 1.0, lambda, 8, {}, 1);
    auto const b = mgf_check(source, delta, grid, 1.0, lambda, 8, {}, 3);
    CHECK(a.empirical == b.empirical);
    CHECK(a.band_low == b.band_low);
}

TEST_CASE("covariance form against a direct double sum")
{
    auto const k = FilterKernel::exponential(1.5);
    TimeGrid const grid(3.0, 60);
    auto const table = covariance_lag_table(k, grid);
    auto engine = make_engine(3);
    auto const delta = random_step_function(grid, engine);
    double direct = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < grid.size(); ++j)
            direct += grid.weight(i) * grid.weight(j) * delta[i] * delta[j]
                      * std::exp(-1.5 * std::abs(grid.node(i) - grid.node(j))) / 3.0;
    CHECK(covariance_form(table, delta, grid) == doctest::Approx(direct).epsilon(1e-6));
    CHECK(covariance_form(table, std::vector<double>(grid.size(), 0.0), grid) == 0.0);
}

TEST_CASE("quadratic-form check, exponential kernel")
{
    auto const k = FilterKernel::exponential(1.0);
    TimeGrid const grid(20.0, 2000);
    auto const rep = quadratic_form_check(k, grid, 50, 6);
    CHECK(rep.d0 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.f0 == doctest::Approx(1.0 / (2 * pi)).epsilon(1e-6));
    CHECK(rep.b2 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(rep.b2 <= rep.d0 * (1 + 1e-9));
    CHECK(rep.forms.size() == 50);
    CHECK(rep.bounded);
    CHECK(rep.nonnegative);
    CHECK(rep.max_ratio <= 1.0 + 1e-3);
    CHECK(rep.pass);
    for (std::size_t i = 0; i < rep.forms.size(); ++i)
        CHECK(rep.forms[i] >= 0.0);
    CHECK_THROWS_AS(quadratic_form_check(k, grid, 9, 6), ContractViolation);
}

TEST_CASE("random step functions")
{
    TimeGrid const grid(5.0, 500);
    auto engine = make_engine(10);
    for (int rep = 0; rep < 50; ++rep) {
        auto const f = random_step_function(grid, engine);
        REQUIRE(f.size() == grid.size());
        std::size_t jumps = 0;
        for (std::size_t j = 1; j < f.size(); ++j)
            jumps += f[j] != f[j - 1] ? 1 : 0;
        REQUIRE(jumps <= 7);
    }
}
