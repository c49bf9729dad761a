#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "ssg/error.hpp"
#include "ssg/noise.hpp"
#include "ssg/stats.hpp"

using namespace ssg;
using std::numbers::pi;

namespace {

double moment(std::vector<double> const& x, int power)
{
    double s = 0.0;
    for (double v : x)
        s += std::pow(v, power);
    return s / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("driver names")
{
    for (auto kind : {DriverKind::gaussian, DriverKind::rademacher, DriverKind::uniform_sqrt3,
                      DriverKind::centered_exponential})
        CHECK(parse_driver(to_string(kind)) == kind);
    CHECK_THROWS_AS(parse_driver("cauchy"), ConfigError);
    CHECK(is_strictly_sub_gaussian(DriverKind::rademacher));
    CHECK_FALSE(is_strictly_sub_gaussian(DriverKind::centered_exponential));
}

TEST_CASE("rademacher draws are signs")
{
    auto const x = sample_driver(DriverKind::rademacher, 10000, 3);
    for (double v : x)
        REQUIRE((v == 1.0 || v == -1.0));
    CHECK(std::abs(mean(x)) < 4.0 / 100.0);
}

TEST_CASE("uniform_sqrt3 variance and support")
{
    auto const x = sample_driver(DriverKind::uniform_sqrt3, 1000000, 5);
    double const var = variance(x);
    CHECK(var >= 0.99);
    CHECK(var <= 1.01);
    CHECK(*std::max_element(x.begin(), x.end()) <= std::sqrt(3.0));
    CHECK(*std::min_element(x.begin(), x.end()) >= -std::sqrt(3.0));
}

TEST_CASE("gaussian fourth moment")
{
    auto const x = sample_driver(DriverKind::gaussian, 1000000, 8);
    double const m4 = moment(x, 4);
    CHECK(m4 >= 2.94);
    CHECK(m4 <= 3.06);
}

TEST_CASE("centered exponential: mean zero, unit variance, skewed")
{
    auto const x = sample_driver(DriverKind::centered_exponential, 1000000, 9);
    CHECK(std::abs(mean(x)) < 0.005);
    CHECK(std::abs(variance(x) - 1.0) < 0.02);
    CHECK(moment(x, 3) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(*std::min_element(x.begin(), x.end()) >= -1.0);
}

TEST_CASE("driver sampling is deterministic and seed-sensitive")
{
    for (auto kind : {DriverKind::gaussian, DriverKind::rademacher, DriverKind::uniform_sqrt3,
                      DriverKind::centered_exponential}) {
        CHECK(sample_driver(kind, 257, 77) == sample_driver(kind, 257, 77));
        CHECK(sample_driver(kind, 257, 77) != sample_driver(kind, 257, 78));
    }
    CHECK_THROWS_AS(sample_driver(DriverKind::gaussian, 0, 1), ContractViolation);
}

TEST_CASE("increments: scale and orthogonality")
{
    TimeGrid const grid(1000.0, 100000);
    auto const inc = simulate_increments(DriverKind::uniform_sqrt3, grid, 0.0, 21);
    CHECK(inc.values.size() == grid.n_steps() + 1);
    double const h = grid.step();
    double const v = variance(inc.values);
    CHECK(v >= 0.98 * h);
    CHECK(v <= 1.02 * h);

    // adjacent pairs of disjoint increments
    std::size_t const n = inc.values.size() / 2;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sxy += inc.values[2 * i] * inc.values[2 * i + 1];
    double const corr = sxy / static_cast<double>(n) / v;
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("increments cover the prehistory")
{
    TimeGrid const grid(1.0, 100);
    auto const inc = simulate_increments(DriverKind::gaussian, grid, 0.5, 1);
    CHECK(inc.n_prehistory == 50);
    CHECK(inc.values.size() == 50 + 101);
    CHECK_THROWS_AS(simulate_increments(DriverKind::gaussian, grid, -1.0, 1), ContractViolation);
    CHECK(increments_over(DriverKind::gaussian, 0.01, 0.0, 3).empty());
}

TEST_CASE("Haar primitives: Parseval sums reproduce min(s, t) at dyadic points")
{
    double const S = 1.0;
    std::vector<double> pts{0.0, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0};
    for (double s : pts)
        for (double t : pts) {
            double sum = 0.0;
            for (std::size_t k = 0; k < 1024; ++k)
                sum += haar_primitive(k, s, S) * haar_primitive(k, t, S);
            REQUIRE(sum == doctest::Approx(std::min(s, t)).epsilon(1e-12));
        }
}

TEST_CASE("Haar primitives on a longer support")
{
    double const S = 4.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < 4096; ++k)
        sum += haar_primitive(k, 1.0, S) * haar_primitive(k, 3.0, S);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("series path: origin, variance, covariance")
{
    BasisSpec const basis{BasisFamily::haar, 1024, 1.0};
    TimeGrid const grid(1.0, 100);
    std::size_t const n_seeds = 10000;
    std::vector<double> x25(n_seeds), x50(n_seeds), x100(n_seeds);
    for (std::size_t s = 0; s < n_seeds; ++s) {
        auto const path = ito_nisio_path(DriverKind::gaussian, basis, grid, 1000 + s);
        REQUIRE(path[0] == 0.0);
        x25[s] = path[25];
        x50[s] = path[50];
        x100[s] = path[100];
    }
    for (auto [x, t] : {std::pair{&x25, 0.25}, {&x50, 0.5}, {&x100, 1.0}}) {
        double const v = moment(*x, 2);
        CHECK(v >= 0.95 * t);
        CHECK(v <= 1.05 * t);
    }
    std::vector<double> prod(n_seeds);
    for (std::size_t s = 0; s < n_seeds; ++s)
        prod[s] = x25[s] * x100[s];
    double const se = std::sqrt(variance(prod) / n_seeds);
    CHECK(std::abs(mean(prod) - 0.25) < 4 * se);
}

TEST_CASE("series path: horizon is enforced")
{
    BasisSpec const basis{BasisFamily::haar, 64, 1.0};
    CHECK_THROWS_AS(ito_nisio_path(DriverKind::gaussian, basis, TimeGrid(2.0, 10), 1), ConfigError);
    std::vector<double> coef(64, 1.0);
    std::vector<double> times{1.5};
    CHECK_THROWS_AS(ito_nisio_series(basis, coef, times), ConfigError);
}

TEST_CASE("series increments are deterministic and sum to the path")
{
    BasisSpec const basis{BasisFamily::haar, 256, 2.0};
    TimeGrid const grid(1.0, 50);
    auto const a = ito_nisio_increments(DriverKind::rademacher, basis, grid, 0.4, 5);
    auto const b = ito_nisio_increments(DriverKind::rademacher, basis, grid, 0.4, 5);
    CHECK(a.values == b.values);
    CHECK(a.n_prehistory == 20);
    CHECK(a.values.size() == 20 + 51);
}

TEST_CASE("exponential kernel basics")
{
    auto const k = FilterKernel::exponential(1.0);
    CHECK(k(0.0) == 1.0);
    CHECK(k(-0.1) == 0.0);
    CHECK(k(1.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(k.energy() == doctest::Approx(0.5));
    double const H = k.truncation_horizon();
    CHECK(std::exp(-2 * H) / 2 <= 1e-8 * 0.5 * (1 + 1e-9));
    CHECK_THROWS_AS(FilterKernel::exponential(0.0), ContractViolation);
}

TEST_CASE("tabulated kernel: energy, horizon, validation")
{
    std::vector<double> t, v;
    for (int i = 0; i <= 4000; ++i) {
        t.push_back(i * 0.005);
        v.push_back(std::exp(-t.back()));
    }
    auto const k = FilterKernel::tabulated(t, v);
    CHECK(k.energy() == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(k(0.0025) == doctest::Approx(0.5 * (1 + std::exp(-0.005))));
    CHECK(k(25.0) == 0.0);
    CHECK(k.truncation_horizon() <= 20.0);
    CHECK(k.truncation_horizon() >= 8.0);
    CHECK_THROWS(FilterKernel::tabulated({0.0, 0.0}, {1.0, 1.0}));
    CHECK_THROWS(FilterKernel::tabulated({0.1, 0.2}, {1.0, 1.0}));
    CHECK_THROWS(FilterKernel::tabulated({0.0, 0.1}, {1.0}));
}

TEST_CASE("identity filter gives unit-variance white noise")
{
    TimeGrid const grid(10.0, 1000);
    double const h = grid.step();
    auto const k = FilterKernel::tabulated({0.0, h}, {1.0 / std::sqrt(h), 0.0});
    auto const inc = simulate_increments(DriverKind::gaussian, grid, k.truncation_horizon(), 4);
    auto const path = apply_filter(k, inc, grid);
    REQUIRE(path.values.size() == grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j)
        REQUIRE(path.values[j]
                == doctest::Approx(inc.at(static_cast<std::ptrdiff_t>(j)) / std::sqrt(h)).epsilon(1e-14));
}

TEST_CASE("filter: long-path variance and lag-1 covariance")
{
    auto const k = FilterKernel::exponential(1.0);
    TimeGrid const grid(20000.0, 2000000);
    auto const inc = simulate_increments(DriverKind::rademacher, grid, k.truncation_horizon(), 17);
    auto const path = apply_filter(k, inc, grid);
    double const var = moment(path.values, 2);
    CHECK(var >= 0.5 * 0.93);
    CHECK(var <= 0.5 * 1.07);
    std::size_t const lag = 100;
    double s = 0.0;
    for (std::size_t j = 0; j + lag < path.values.size(); ++j)
        s += path.values[j] * path.values[j + lag];
    double const cov = s / static_cast<double>(path.values.size() - lag);
    CHECK(cov == doctest::Approx(std::exp(-1.0) / 2).epsilon(0.07));
}

TEST_CASE("filter: insufficient prehistory is named")
{
    auto const k = FilterKernel::exponential(1.0);
    TimeGrid const grid(1.0, 100);
    auto const inc = simulate_increments(DriverKind::gaussian, grid, 1.0, 4);
    try {
        apply_filter(k, inc, grid);
        FAIL("expected a contract violation");
    } catch (ContractViolation const& e) {
        std::string const msg = e.what();
        CHECK(msg.find("prehistory") != std::string::npos);
        CHECK(msg.find("9.2") != std::string::npos);
    }
}

TEST_CASE("noise paths are reproducible")
{
    TimeGrid const grid(5.0, 500);
    NoiseSpec spec;
    spec.driver = DriverKind::uniform_sqrt3;
    spec.kernel = FilterKernel::exponential(2.0);
    auto const a = simulate_noise(spec, grid, 99);
    auto const b = simulate_noise(spec, grid, 99);
    CHECK(a.values == b.values);
    CHECK(simulate_noise(spec, grid, 100).values != a.values);

    spec.process = DriverProcess::ito_nisio;
    spec.basis = BasisSpec{BasisFamily::haar, 2048, 16.0};
    CHECK(simulate_noise(spec, grid, 5).values == simulate_noise(spec, grid, 5).values);
}

TEST_CASE("white mode")
{
    TimeGrid const grid(1.0, 100);
    NoiseSpec spec;
    auto const path = simulate_noise(spec, grid, 3);
    auto const inc = simulate_increments(DriverKind::gaussian, grid, 0.0, 3);
    CHECK(spec.spectral_sup() == doctest::Approx(1.0 / (2 * pi)));
    REQUIRE(path.values.size() == grid.size());
    CHECK_FALSE(path.kernel.has_value());
    for (std::size_t j = 0; j < grid.size(); ++j)
        REQUIRE(path.values[j]
                == doctest::Approx(inc.at(static_cast<std::ptrdiff_t>(j)) / grid.step()).epsilon(1e-14));
}

TEST_CASE("filter covariance closed forms")
{
    auto const k = FilterKernel::exponential(1.0);
    CHECK(std::abs(covariance_of_filter(k, 0.0) - 0.5) < 1e-6);
    CHECK(std::abs(covariance_of_filter(k, 1.0) - std::exp(-1.0) / 2) < 1e-6);
    CHECK(covariance_of_filter(k, 2 * k.truncation_horizon()) == 0.0);
    CHECK(covariance_of_filter(k, 3 * k.truncation_horizon()) == 0.0);
    for (double a : {0.5, 2.0}) {
        auto const ka = FilterKernel::exponential(a);
        for (double t : {0.0, 0.3, 1.0, 2.5})
            CHECK(std::abs(covariance_of_filter(ka, t) - std::exp(-a * t) / (2 * a)) < 1e-6);
    }
}

TEST_CASE("covariance: tabulated kernel, disjoint supports")
{
    auto const k = FilterKernel::tabulated({0.0, 0.5, 1.0}, {1.0, 1.0, 0.0});
    CHECK(covariance_of_filter(k, 2 * k.truncation_horizon()) == 0.0);
    CHECK(covariance_of_filter(k, 0.0) == doctest::Approx(k.energy()).epsilon(1e-6));
}

TEST_CASE("spectral density")
{
    auto const k = FilterKernel::exponential(1.0);
    CHECK(std::abs(spectral_density(k, 0.0) - 1.0 / (2 * pi)) < 1e-6);
    auto const peak = f0_sup(k);
    CHECK(peak.f0 == doctest::Approx(1.0 / (2 * pi)).epsilon(1e-6));
    CHECK(std::abs(peak.lambda) < 1e-3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 100; ++i) {
        double const lambda = u(rng);
        REQUIRE(spectral_density(k, lambda) == doctest::Approx(spectral_density(k, -lambda)).epsilon(1e-14));
        REQUIRE(spectral_density(k, lambda)
                == doctest::Approx(1.0 / (2 * pi * (1 + lambda * lambda))).epsilon(1e-12));
        REQUIRE(spectral_density(k, lambda) >= 0.0);
    }
}

TEST_CASE("spectral density: tabulated kernel matches the analytic transform")
{
    std::vector<double> t, v;
    for (int i = 0; i <= 20000; ++i) {
        t.push_back(i * 0.001);
        v.push_back(std::exp(-2.0 * t.back()));
    }
    auto const k = FilterKernel::tabulated(t, v);
    for (double lambda : {0.0, 0.5, 3.0})
        CHECK(spectral_density(k, lambda)
              == doctest::Approx(1.0 / (2 * pi * (4 + lambda * lambda))).epsilon(1e-5));
    CHECK(f0_sup(k).f0 == doctest::Approx(1.0 / (8 * pi)).epsilon(1e-5));
}

TEST_CASE("spectral peak away from zero")
{
    // ψ = 1 on [0,1) then −1 on [1,2): transfer vanishes at λ = 0.
    auto const k = FilterKernel::tabulated({0.0, 0.999999, 1.000001, 2.0, 2.000001},
                                           {1.0, 1.0, -1.0, -1.0, 0.0});
    CHECK(spectral_density(k, 0.0) < 1e-10);
    auto const peak = f0_sup(k);
    CHECK(std::abs(peak.lambda) > 0.5);
    for (double lambda = 0.0; lambda < 20.0; lambda += 0.01)
        REQUIRE(spectral_density(k, lambda) <= peak.f0 * (1 + 1e-6));
}

TEST_CASE("d0 from spectral supremum")
{
    CHECK(d0_from_spectral(1.0 / (2 * pi)) == doctest::Approx(1.0));
    CHECK(d0_from_spectral(1.0) == doctest::Approx(2 * pi));
    CHECK(d0_from_spectral(f0_sup(FilterKernel::exponential(2.0)).f0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK_THROWS_AS(d0_from_spectral(0.0), ContractViolation);
    CHECK_THROWS_AS(d0_from_spectral(-1.0), ContractViolation);
    CHECK_THROWS_AS(d0_from_spectral(INFINITY), ContractViolation);
}

TEST_CASE("property: sample covariance matches the filter covariance at each lag")
{
    double const a = 2.0;
    auto const k = FilterKernel::exponential(a);
    TimeGrid const grid(5.0 / a, 250);
    double const h = grid.step();
    NoiseSpec spec;
    spec.driver = DriverKind::gaussian;
    spec.kernel = k;
    std::vector<std::size_t> lags{0, 1, 50, 100, 150, 200, 250};
    std::size_t const n_paths = 20000;
    std::vector<std::vector<double>> prods(lags.size(), std::vector<double>(n_paths));
    for (std::size_t p = 0; p < n_paths; ++p) {
        auto const path = simulate_noise(spec, grid, mix64(123, p));
        for (std::size_t l = 0; l < lags.size(); ++l)
            prods[l][p] = path.values[0] * path.values[lags[l]];
    }
    for (std::size_t l = 0; l < lags.size(); ++l) {
        double const m = mean(prods[l]);
        double const se = std::sqrt(variance(prods[l]) / n_paths);
        double const theory = covariance_of_filter(k, static_cast<double>(lags[l]) * h);
        INFO("lag steps " << lags[l]);
        CHECK(std::abs(m - theory) < 4 * se);
    }
}
