#pragma once

#include <cstddef>
#include <span>

namespace ssg {

struct Interval
{
    double low = 0.0;
    double high = 1.0;
};

/// Exact two-sided binomial interval for k successes out of n.
Interval clopper_pearson(std::size_t k, std::size_t n, double confidence = 0.95);

/// Φ(x).
double normal_cdf(double x);

struct CountBand
{
    std::size_t low = 0;
    std::size_t high = 0;
};

/// Central band [F⁻¹(α/2), F⁻¹(1−α/2)] of Binomial(n, p) counts.
CountBand binomial_band(std::size_t n, double p, double confidence = 0.95);

double mean(std::span<double const> x);

/// Unbiased sample variance.
double variance(std::span<double const> x);

}  // namespace ssg
