#include "ssg/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ssg/error.hpp"

namespace ssg {

//---------------------------------------------------------------------------//
// Drivers
//---------------------------------------------------------------------------//

std::string_view to_string(DriverKind kind) noexcept
{
    switch (kind) {
    case DriverKind::gaussian: return "gaussian";
    case DriverKind::rademacher: return "rademacher";
    case DriverKind::uniform_sqrt3: return "uniform_sqrt3";
    case DriverKind::centered_exponential: return "centered_exponential";
    }
    return "unknown";
}

DriverKind parse_driver(std::string_view name)
{
    for (auto kind : {DriverKind::gaussian, DriverKind::rademacher, DriverKind::uniform_sqrt3,
                      DriverKind::centered_exponential})
        if (name == to_string(kind))
            return kind;
    throw ConfigError("noise.driver", "unknown driver '" + std::string(name)
                                          + "' (expected gaussian, rademacher, uniform_sqrt3 or "
                                            "centered_exponential)");
}

namespace {

void fill_driver(DriverKind kind, std::span<double> out, Engine& engine)
{
    switch (kind) {
    case DriverKind::gaussian: {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& x : out)
            x = dist(engine);
        return;
    }
    case DriverKind::rademacher: {
        std::bernoulli_distribution dist(0.5);
        for (auto& x : out)
            x = dist(engine) ? 1.0 : -1.0;
        return;
    }
    case DriverKind::uniform_sqrt3: {
        std::uniform_real_distribution<double> dist(-std::numbers::sqrt3, std::numbers::sqrt3);
        for (auto& x : out)
            x = dist(engine);
        return;
    }
    case DriverKind::centered_exponential: {
        std::exponential_distribution<double> dist(1.0);
        for (auto& x : out)
            x = dist(engine) - 1.0;
        return;
    }
    }
    throw ConfigError("noise.driver", "unknown driver kind");
}

}  // namespace

double draw_driver(DriverKind kind, Engine& engine)
{
    double x = 0.0;
    fill_driver(kind, std::span<double>(&x, 1), engine);
    return x;
}

std::vector<double> sample_driver(DriverKind kind, std::size_t count, std::uint64_t seed)
{
    if (count == 0)
        throw ContractViolation("sample_driver: count must be at least 1");
    std::vector<double> out(count);
    auto engine = make_engine(seed);
    fill_driver(kind, out, engine);
    return out;
}

//---------------------------------------------------------------------------//
// Filter kernels
//---------------------------------------------------------------------------//

FilterKernel FilterKernel::exponential(double rate)
{
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw ContractViolation("FilterKernel::exponential: rate must be positive");
    FilterKernel k;
    k.form_ = Form::exponential;
    k.rate_ = rate;
    // e^{-2aH} <= tail_tolerance, with a little margin against rounding.
    k.horizon_ = -std::log(tail_tolerance) / (2.0 * rate) * (1.0 + 1e-9);
    k.energy_ = 1.0 / (2.0 * rate);
    return k;
}

FilterKernel FilterKernel::tabulated(std::vector<double> times, std::vector<double> values)
{
    if (times.size() != values.size() || times.size() < 2)
        throw ContractViolation("FilterKernel::tabulated: need at least two (time, value) pairs");
    if (times.front() != 0.0)
        throw ContractViolation("FilterKernel::tabulated: times must start at 0");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
            throw ContractViolation("FilterKernel::tabulated: non-finite entry at row "
                                    + std::to_string(i));
        if (i > 0 && !(times[i] > times[i - 1]))
            throw ContractViolation("FilterKernel::tabulated: times must be strictly increasing");
    }

    // Exact energy of the piecewise-linear interpolant, segment by segment.
    std::vector<double> segment(times.size() - 1);
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        double const p = values[i];
        double const q = values[i + 1];
        segment[i] = (times[i + 1] - times[i]) * (p * p + p * q + q * q) / 3.0;
    }
    double total = 0.0;
    for (double s : segment)
        total += s;
    if (!(total > 0.0))
        throw ContractViolation("FilterKernel::tabulated: kernel has zero energy");

    // Shortest prefix whose discarded tail energy is within tolerance.
    std::size_t cut = segment.size();
    double tail = 0.0;
    while (cut > 0 && tail + segment[cut - 1] <= tail_tolerance * total) {
        tail += segment[cut - 1];
        --cut;
    }

    FilterKernel k;
    k.form_ = Form::tabulated;
    k.times_ = std::move(times);
    k.values_ = std::move(values);
    k.horizon_ = k.times_[cut];
    k.energy_ = total;
    return k;
}

FilterKernel FilterKernel::load(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("noise.kernel.path", "cannot open kernel file " + path.string());
    std::vector<double> times;
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream row(line);
        double t = 0.0;
        double v = 0.0;
        if (!(row >> t))
            continue;
        if (!(row >> v))
            throw ConfigError("noise.kernel.path", path.string() + ":" + std::to_string(line_no)
                                                       + ": expected two columns");
        times.push_back(t);
        values.push_back(v);
    }
    try {
        return tabulated(std::move(times), std::move(values));
    } catch (ContractViolation const& e) {
        throw ConfigError("noise.kernel.path", path.string() + ": " + e.what());
    }
}

double FilterKernel::operator()(double t) const noexcept
{
    if (t < 0.0 || t > horizon_)
        return 0.0;
    if (form_ == Form::exponential)
        return std::exp(-rate_ * t);
    auto const upper = std::upper_bound(times_.begin(), times_.end(), t);
    if (upper == times_.end())
        return values_.back();
    auto const i = static_cast<std::size_t>(upper - times_.begin()) - 1;
    double const w = (t - times_[i]) / (times_[i + 1] - times_[i]);
    return values_[i] + w * (values_[i + 1] - values_[i]);
}

std::complex<double> FilterKernel::transfer(double lambda) const
{
    using namespace std::complex_literals;
    double const norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    if (form_ == Form::exponential)
        return norm / (rate_ + 1i * lambda);

    // Exact integral of (linear segment)·e^{-iλt}; trapezoid when λ·Δt is tiny.
    std::complex<double> acc = 0.0;
    std::complex<double> const z = -1i * lambda;
    for (std::size_t i = 0; i + 1 < times_.size() && times_[i] < horizon_; ++i) {
        double const a = times_[i];
        double const b = times_[i + 1];
        double const width = b - a;
        double const p = values_[i];
        double const slope = (values_[i + 1] - p) / width;
        std::complex<double> const ea = std::exp(z * a);
        std::complex<double> const eb = std::exp(z * b);
        if (std::abs(lambda) * width < 1e-4) {
            acc += 0.5 * width * (p * ea + values_[i + 1] * eb);
            continue;
        }
        std::complex<double> const base = (eb - ea) / z;
        std::complex<double> const ramp = width * eb / z - (eb - ea) / (z * z);
        acc += p * base + slope * ramp;
    }
    return norm * acc;
}

std::string FilterKernel::describe() const
{
    std::ostringstream os;
    if (form_ == Form::exponential)
        os << "exponential(a=" << rate_ << ")";
    else
        os << "tabulated(n=" << times_.size() << ", horizon=" << horizon_ << ")";
    return os.str();
}

double covariance_of_filter(FilterKernel const& kernel, double t)
{
    if (!(t >= 0.0))
        throw ContractViolation("covariance_of_filter: lag must be nonnegative");
    double const horizon = kernel.truncation_horizon();
    if (t >= horizon)
        return 0.0;
    double const width = horizon / 65536.0;
    auto const panels = static_cast<std::size_t>(std::ceil((horizon - t) / width));
    return integrate_function([&](double u) { return kernel(t + u) * kernel(u); }, 0.0,
                              horizon - t, std::max<std::size_t>(panels, 16));
}

double spectral_density(FilterKernel const& kernel, double lambda)
{
    return std::norm(kernel.transfer(lambda));
}

SpectralPeak f0_sup(FilterKernel const& kernel)
{
    auto f = [&](double lambda) { return spectral_density(kernel, lambda); };
    constexpr double log_lo = -6.0;
    constexpr double log_hi = 6.0;

    SpectralPeak best{f(0.0), 0.0};
    std::vector<double> grid;
    std::size_t best_index = 0;
    double previous = -1.0;
    for (std::size_t n = 64; n <= (std::size_t{1} << 16); n *= 2) {
        grid.assign(n, 0.0);
        SpectralPeak level{f(0.0), 0.0};
        std::size_t level_index = 0;
        for (std::size_t i = 0; i < n; ++i) {
            grid[i] = std::pow(10.0, log_lo + (log_hi - log_lo) * static_cast<double>(i)
                                                  / static_cast<double>(n - 1));
            double const value = f(grid[i]);
            if (value > level.f0) {
                level = {value, grid[i]};
                level_index = i + 1;
            }
        }
        best = level;
        best_index = level_index;
        if (previous >= 0.0 && std::abs(level.f0 - previous) <= 1e-6 * level.f0)
            break;
        previous = level.f0;
    }

    // Polish between the neighbours of the best node (index 0 stands for λ = 0).
    double lo = best_index <= 1 ? 0.0 : grid[best_index - 2];
    double hi = best_index < grid.size() ? grid[best_index] : grid.back();
    if (best_index == 0)
        hi = grid.front();
    double const golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = f(x1);
        }
    }
    if (f1 > best.f0)
        best = {f1, x1};
    if (f2 > best.f0)
        best = {f2, x2};
    return best;
}

double d0_from_spectral(double f0)
{
    if (!(f0 > 0.0) || !std::isfinite(f0))
        throw ContractViolation("d0_from_spectral: f0 must be positive and finite");
    return 2.0 * std::numbers::pi * f0;
}

//---------------------------------------------------------------------------//
// Increments
//---------------------------------------------------------------------------//

namespace {

std::size_t steps_covering(double duration, double step)
{
    if (!(duration > 0.0))
        return 0;
    return static_cast<std::size_t>(std::ceil(duration / step - 1e-9));
}

}  // namespace

std::vector<double> increments_over(DriverKind kind, double step, double duration,
                                    std::uint64_t seed)
{
    if (!(step > 0.0))
        throw ContractViolation("increments_over: step must be positive");
    std::vector<double> out(steps_covering(duration, step));
    auto engine = make_engine(seed);
    fill_driver(kind, out, engine);
    double const scale = std::sqrt(step);
    for (auto& x : out)
        x *= scale;
    return out;
}

Increments simulate_increments(DriverKind kind, TimeGrid const& grid, double prehistory,
                               std::uint64_t seed)
{
    if (prehistory < 0.0)
        throw ContractViolation("simulate_increments: prehistory must be nonnegative");
    Increments inc;
    inc.step = grid.step();
    inc.n_prehistory = steps_covering(prehistory, grid.step());
    inc.driver = kind;
    inc.seed = seed;
    inc.values.resize(inc.n_prehistory + grid.size());
    auto engine = make_engine(seed);
    fill_driver(kind, inc.values, engine);
    double const scale = std::sqrt(grid.step());
    for (auto& x : inc.values)
        x *= scale;
    return inc;
}

//---------------------------------------------------------------------------//
// Series construction
//---------------------------------------------------------------------------//

double haar_primitive(std::size_t k, double t, double horizon) noexcept
{
    t = std::clamp(t, 0.0, horizon);
    double const root = std::sqrt(horizon);
    if (k == 0)
        return t / root;
    int level = 0;
    while ((std::size_t{2} << level) <= k)
        ++level;
    double const count = std::ldexp(1.0, level);
    double const width = horizon / count;
    double const left = static_cast<double>(k - (std::size_t{1} << level)) * width;
    double const x = t - left;
    if (x <= 0.0 || x >= width)
        return 0.0;
    double const amplitude = std::sqrt(count) / root;
    return amplitude * (x <= 0.5 * width ? x : width - x);
}

std::vector<double> ito_nisio_series(BasisSpec const& basis, std::span<double const> coefficients,
                                     std::span<double const> times)
{
    if (basis.n_terms == 0)
        throw ConfigError("noise.basis.n_terms", "must be at least 1");
    if (coefficients.size() < basis.n_terms)
        throw ContractViolation("ito_nisio_series: fewer coefficients than basis terms");
    double const horizon = basis.horizon;
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        double const t = times[i];
        if (t < 0.0 || t > horizon * (1.0 + 1e-12))
            throw ConfigError("noise.basis.horizon",
                              "time " + std::to_string(t) + " outside the basis support [0, "
                                  + std::to_string(horizon) + "]");
        double sum = coefficients[0] * haar_primitive(0, t, horizon);
        // One Schauder triangle per level is nonzero at t.
        for (std::size_t first = 1; first < basis.n_terms; first <<= 1) {
            auto m = static_cast<std::size_t>(t / horizon * static_cast<double>(first));
            m = std::min(m, first - 1);
            std::size_t const k = first + m;
            if (k < basis.n_terms)
                sum += coefficients[k] * haar_primitive(k, t, horizon);
        }
        out[i] = sum;
    }
    return out;
}

std::vector<double> ito_nisio_path(DriverKind kind, BasisSpec const& basis, TimeGrid const& grid,
                                   std::uint64_t seed)
{
    if (grid.horizon() > basis.horizon)
        throw ConfigError("noise.basis.horizon", "grid horizon exceeds the basis support");
    auto const coefficients = sample_driver(kind, std::max<std::size_t>(basis.n_terms, 1), seed);
    auto const times = grid.nodes();
    return ito_nisio_series(basis, coefficients, times);
}

Increments ito_nisio_increments(DriverKind kind, BasisSpec const& basis, TimeGrid const& grid,
                                double prehistory, std::uint64_t seed)
{
    if (prehistory < 0.0)
        throw ContractViolation("ito_nisio_increments: prehistory must be nonnegative");
    double const h = grid.step();
    std::size_t const n_pre = steps_covering(prehistory, h);
    double const needed = std::max(grid.horizon(), static_cast<double>(n_pre + 1) * h);
    if (needed > basis.horizon * (1.0 + 1e-12))
        throw ConfigError("noise.basis.horizon",
                          "basis support must cover " + std::to_string(needed) + " time units");

    auto const forward_coef = sample_driver(kind, basis.n_terms, mix64(seed, 1));
    auto const backward_coef = sample_driver(kind, basis.n_terms, mix64(seed, 2));

    std::vector<double> forward_times(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j)
        forward_times[j] = grid.node(j);
    std::vector<double> backward_times(n_pre + 2);
    for (std::size_t m = 0; m < backward_times.size(); ++m)
        backward_times[m] = std::min(static_cast<double>(m) * h, basis.horizon);
    auto const forward = ito_nisio_series(basis, forward_coef, forward_times);
    auto const backward = ito_nisio_series(basis, backward_coef, backward_times);

    Increments inc;
    inc.step = h;
    inc.n_prehistory = n_pre;
    inc.driver = kind;
    inc.seed = seed;
    inc.values.resize(n_pre + grid.size());
    // Node −m: ξ(−m h) − ξ(−(m+1) h) = ξ₂(m h) − ξ₂((m+1) h); node 0 uses ξ(0) = 0.
    for (std::size_t m = 0; m <= n_pre; ++m)
        inc.values[n_pre - m] = backward[m] - backward[m + 1];
    for (std::size_t j = 1; j < grid.size(); ++j)
        inc.values[n_pre + j] = forward[j] - forward[j - 1];
    return inc;
}

//---------------------------------------------------------------------------//
// Paths
//---------------------------------------------------------------------------//

NoisePath apply_filter(FilterKernel const& kernel, Increments const& increments,
                       TimeGrid const& grid)
{
    double const h = grid.step();
    if (std::abs(increments.step - h) > 1e-12 * h)
        throw ContractViolation("apply_filter: increment step does not match the grid");
    if (increments.values.size() != increments.n_prehistory + grid.size())
        throw ContractViolation("apply_filter: increments do not cover [0, T]");
    auto const n_taps =
        static_cast<std::size_t>(std::floor(kernel.truncation_horizon() / h + 1e-9)) + 1;
    if (increments.n_prehistory + 1 < n_taps)
        throw ContractViolation(
            "apply_filter: insufficient prehistory, the kernel needs "
            + std::to_string(n_taps - 1) + " steps (" + std::to_string(kernel.truncation_horizon())
            + " time units) before t=0 but only " + std::to_string(increments.n_prehistory)
            + " were supplied");

    // Reversed taps turn the convolution into a forward dot product.
    std::vector<double> taps(n_taps);
    for (std::size_t k = 0; k < n_taps; ++k)
        taps[n_taps - 1 - k] = kernel(static_cast<double>(k) * h);

    NoisePath path{grid, std::vector<double>(grid.size()), increments.driver, kernel,
                   increments.seed};
    double const* data = increments.values.data() + increments.n_prehistory + 1 - n_taps;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double const* x = data + j;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t k = 0;
        for (; k + 4 <= n_taps; k += 4) {
            s0 += taps[k] * x[k];
            s1 += taps[k + 1] * x[k + 1];
            s2 += taps[k + 2] * x[k + 2];
            s3 += taps[k + 3] * x[k + 3];
        }
        for (; k < n_taps; ++k)
            s0 += taps[k] * x[k];
        path.values[j] = (s0 + s1) + (s2 + s3);
    }
    return path;
}

NoisePath white_noise(Increments const& increments, TimeGrid const& grid)
{
    if (increments.values.size() != increments.n_prehistory + grid.size())
        throw ContractViolation("white_noise: increments do not cover [0, T]");
    NoisePath path{grid, std::vector<double>(grid.size()), increments.driver, std::nullopt,
                   increments.seed};
    double const inv_h = 1.0 / grid.step();
    for (std::size_t j = 0; j < grid.size(); ++j)
        path.values[j] = increments.values[increments.n_prehistory + j] * inv_h;
    return path;
}

double NoiseSpec::resolved_prehistory() const
{
    if (prehistory)
        return *prehistory;
    return kernel ? kernel->truncation_horizon() : 0.0;
}

double NoiseSpec::spectral_sup() const
{
    if (!kernel)
        return 1.0 / (2.0 * std::numbers::pi);
    return f0_sup(*kernel).f0;
}

NoisePath simulate_noise(NoiseSpec const& spec, TimeGrid const& grid, std::uint64_t seed)
{
    double const prehistory = spec.kernel ? spec.resolved_prehistory() : 0.0;
    Increments inc = spec.process == DriverProcess::ito_nisio
                         ? ito_nisio_increments(spec.driver, spec.basis, grid, prehistory, seed)
                         : simulate_increments(spec.driver, grid, prehistory, seed);
    return spec.kernel ? apply_filter(*spec.kernel, inc, grid) : white_noise(inc, grid);
}

}  // namespace ssg
