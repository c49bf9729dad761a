#include "ssg/stats.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "ssg/error.hpp"

namespace ssg {

Interval clopper_pearson(std::size_t k, std::size_t n, double confidence)
{
    if (n == 0 || k > n)
        throw ContractViolation("clopper_pearson: need 0 <= k <= n and n >= 1");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw ContractViolation("clopper_pearson: confidence must lie in (0, 1)");
    double const alpha = 1.0 - confidence;
    auto const kd = static_cast<double>(k);
    auto const nd = static_cast<double>(n);
    Interval out;
    out.low = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, 0.5 * alpha);
    out.high = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - 0.5 * alpha);
    return out;
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

CountBand binomial_band(std::size_t n, double p, double confidence)
{
    if (n == 0 || !(p >= 0.0 && p <= 1.0))
        throw ContractViolation("binomial_band: need n >= 1 and p in [0, 1]");
    double const alpha = 1.0 - confidence;
    boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
    // Smallest k with F(k) >= level, by bisection on the exact CDF.
    auto quantile = [&](double level) {
        std::size_t lo = 0;
        std::size_t hi = n;
        while (lo < hi) {
            std::size_t const mid = lo + (hi - lo) / 2;
            if (boost::math::cdf(dist, static_cast<double>(mid)) >= level)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    };
    return {quantile(0.5 * alpha), quantile(1.0 - 0.5 * alpha)};
}

double mean(std::span<double const> x)
{
    if (x.empty())
        throw ContractViolation("mean: empty sample");
    double s = 0.0;
    for (double v : x)
        s += v;
    return s / static_cast<double>(x.size());
}

double variance(std::span<double const> x)
{
    if (x.size() < 2)
        throw ContractViolation("variance: need at least two observations");
    double const m = mean(x);
    double s = 0.0;
    for (double v : x)
        s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace ssg
