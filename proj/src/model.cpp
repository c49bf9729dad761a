#include "ssg/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ssg/error.hpp"
#include "ssg/parallel.hpp"
#include "ssg/random.hpp"

namespace ssg {

//---------------------------------------------------------------------------//
// ParameterBox
//---------------------------------------------------------------------------//

ParameterBox::ParameterBox(std::vector<double> lower, std::vector<double> upper)
  : lower_(std::move(lower)), upper_(std::move(upper))
{
    if (lower_.empty())
        throw ContractViolation("ParameterBox: dimension must be at least 1");
    if (lower_.size() != upper_.size())
        throw ContractViolation("ParameterBox: lower and upper bounds differ in length");
    for (std::size_t i = 0; i < lower_.size(); ++i)
        if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i]))
            throw ContractViolation("ParameterBox: need lower < upper in coordinate "
                                    + std::to_string(i));
}

double ParameterBox::diameter() const noexcept
{
    double sum = 0.0;
    for (std::size_t i = 0; i < lower_.size(); ++i)
        sum += width(i) * width(i);
    return std::sqrt(sum);
}

bool ParameterBox::contains(std::span<double const> tau, double slack) const noexcept
{
    if (tau.size() != lower_.size())
        return false;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        double const pad = slack * width(i);
        if (!(tau[i] >= lower_[i] - pad && tau[i] <= upper_[i] + pad))
            return false;
    }
    return true;
}

bool ParameterBox::interior(std::span<double const> tau) const noexcept
{
    if (tau.size() != lower_.size())
        return false;
    for (std::size_t i = 0; i < tau.size(); ++i)
        if (!(tau[i] > lower_[i] && tau[i] < upper_[i]))
            return false;
    return true;
}

std::vector<double> ParameterBox::clamp(std::span<double const> tau) const
{
    std::vector<double> out(tau.begin(), tau.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], lower_[i], upper_[i]);
    return out;
}

void ParameterBox::require_contains(std::span<double const> tau, char const* what) const
{
    if (tau.size() != lower_.size())
        throw ContractViolation(std::string(what) + ": parameter has dimension "
                                + std::to_string(tau.size()) + ", box has "
                                + std::to_string(lower_.size()));
    for (std::size_t i = 0; i < tau.size(); ++i) {
        double const pad = 1e-12 * width(i);
        if (!(tau[i] >= lower_[i] - pad && tau[i] <= upper_[i] + pad)) {
            std::ostringstream os;
            os << what << ": coordinate " << i << " = " << tau[i] << " outside [" << lower_[i]
               << ", " << upper_[i] << "]";
            throw DomainError(i, os.str());
        }
    }
}

std::vector<std::vector<double>> ParameterBox::corners() const
{
    std::size_t const q = dimension();
    std::vector<std::vector<double>> out;
    out.reserve(std::size_t{1} << q);
    for (std::size_t mask = 0; mask < (std::size_t{1} << q); ++mask) {
        std::vector<double> c(q);
        for (std::size_t i = 0; i < q; ++i)
            c[i] = (mask >> i) & 1U ? upper_[i] : lower_[i];
        out.push_back(std::move(c));
    }
    return out;
}

//---------------------------------------------------------------------------//
// Models
//---------------------------------------------------------------------------//

std::vector<double> RegressionModel::gradient(double t, std::span<double const> tau) const
{
    std::vector<double> out(dimension());
    grad(t, tau, out);
    return out;
}

std::vector<double> RegressionModel::evaluate(TimeGrid const& grid,
                                              std::span<double const> tau) const
{
    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = eval(grid.node(j), tau);
    return out;
}

double LinearModel::eval(double t, std::span<double const> tau) const
{
    double value = 0.0;
    double power = t;
    for (double c : tau) {
        value += c * power;
        power *= t;
    }
    return value;
}

void LinearModel::grad(double t, std::span<double const>, std::span<double> out) const
{
    double power = t;
    for (auto& g : out) {
        g = power;
        power *= t;
    }
}

ConstantModel::ConstantModel(ParameterBox box) : RegressionModel(std::move(box))
{
    if (dimension() != 1)
        throw ContractViolation("ConstantModel: dimension must be 1");
}

double ConstantModel::eval(double, std::span<double const> tau) const
{
    return tau[0];
}

void ConstantModel::grad(double, std::span<double const>, std::span<double> out) const
{
    out[0] = 1.0;
}

ConstantRegressors::ConstantRegressors(std::vector<double> values) : values_(std::move(values))
{
    if (values_.empty())
        throw ContractViolation("ConstantRegressors: need at least one component");
}

void ConstantRegressors::value(double, std::span<double> out) const
{
    std::copy(values_.begin(), values_.end(), out.begin());
}

std::string ConstantRegressors::descriptor() const
{
    std::ostringstream os;
    os << "constant(";
    for (std::size_t i = 0; i < values_.size(); ++i)
        os << (i ? "," : "") << values_[i];
    os << ")";
    return os.str();
}

CosineRegressors::CosineRegressors(std::size_t dimension, double omega)
  : dimension_(dimension), omega_(omega)
{
    if (dimension == 0)
        throw ContractViolation("CosineRegressors: need at least one component");
}

void CosineRegressors::value(double t, std::span<double> out) const
{
    out[0] = 1.0;
    for (std::size_t i = 1; i < dimension_; ++i)
        out[i] = std::cos(static_cast<double>(i) * omega_ * t);
}

std::string CosineRegressors::descriptor() const
{
    std::ostringstream os;
    os << "cosine(q=" << dimension_ << ",omega=" << omega_ << ")";
    return os.str();
}

TabulatedRegressors::TabulatedRegressors(std::vector<double> times,
                                         std::vector<std::vector<double>> rows)
  : times_(std::move(times)), rows_(std::move(rows))
{
    if (times_.size() < 2 || times_.size() != rows_.size())
        throw ContractViolation("TabulatedRegressors: need at least two rows");
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (rows_[i].empty() || rows_[i].size() != rows_.front().size())
            throw ContractViolation("TabulatedRegressors: ragged row " + std::to_string(i));
        if (i > 0 && !(times_[i] > times_[i - 1]))
            throw ContractViolation("TabulatedRegressors: times must be strictly increasing");
    }
}

std::shared_ptr<TabulatedRegressors> TabulatedRegressors::load(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("model.regressors.path", "cannot open " + path.string());
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream row(line);
        double t = 0.0;
        if (!(row >> t))
            continue;
        std::vector<double> y;
        for (double v = 0.0; row >> v;)
            y.push_back(v);
        times.push_back(t);
        rows.push_back(std::move(y));
    }
    try {
        return std::make_shared<TabulatedRegressors>(std::move(times), std::move(rows));
    } catch (ContractViolation const& e) {
        throw ConfigError("model.regressors.path", path.string() + ": " + e.what());
    }
}

void TabulatedRegressors::value(double t, std::span<double> out) const
{
    auto const upper = std::upper_bound(times_.begin(), times_.end(), t);
    if (upper == times_.begin()) {
        std::copy(rows_.front().begin(), rows_.front().end(), out.begin());
        return;
    }
    if (upper == times_.end()) {
        std::copy(rows_.back().begin(), rows_.back().end(), out.begin());
        return;
    }
    auto const i = static_cast<std::size_t>(upper - times_.begin()) - 1;
    double const w = (t - times_[i]) / (times_[i + 1] - times_[i]);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = rows_[i][k] + w * (rows_[i + 1][k] - rows_[i][k]);
}

std::string TabulatedRegressors::descriptor() const
{
    return "tabulated(rows=" + std::to_string(times_.size()) + ")";
}

namespace {

constexpr std::size_t max_inline_dimension = 16;

double dot_regressors(Regressors const& y, double t, std::span<double const> tau,
                      std::span<double> buffer)
{
    y.value(t, buffer);
    double s = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i)
        s += tau[i] * buffer[i];
    return s;
}

}  // namespace

ExponentialModel::ExponentialModel(ParameterBox box, std::shared_ptr<Regressors const> regressors)
  : RegressionModel(std::move(box)), regressors_(std::move(regressors))
{
    if (!regressors_)
        throw ContractViolation("ExponentialModel: regressors are required");
    if (regressors_->dimension() != dimension())
        throw ContractViolation("ExponentialModel: regressor dimension "
                                + std::to_string(regressors_->dimension())
                                + " does not match parameter dimension "
                                + std::to_string(dimension()));
    if (dimension() > max_inline_dimension)
        throw ContractViolation("ExponentialModel: dimension above 16 is not supported");
}

double ExponentialModel::eval(double t, std::span<double const> tau) const
{
    std::array<double, max_inline_dimension> buffer{};
    return std::exp(dot_regressors(*regressors_, t, tau, std::span(buffer).first(tau.size())));
}

void ExponentialModel::grad(double t, std::span<double const> tau, std::span<double> out) const
{
    std::array<double, max_inline_dimension> buffer{};
    auto y = std::span(buffer).first(tau.size());
    double const a = std::exp(dot_regressors(*regressors_, t, tau, y));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = y[i] * a;
}

std::string ExponentialModel::descriptor() const
{
    return "exponential[" + regressors_->descriptor() + "]";
}

//---------------------------------------------------------------------------//
// Norming and Φ_T
//---------------------------------------------------------------------------//

std::string_view to_string(NormingMode mode) noexcept
{
    return mode == NormingMode::d_T ? "d_T" : "s_T";
}

std::vector<double> norming_matrix(RegressionModel const& model, std::span<double const> theta,
                                   TimeGrid const& grid)
{
    model.box().require_contains(theta, "norming_matrix");
    std::size_t const q = model.dimension();
    std::vector<std::vector<double>> partials(q, std::vector<double>(grid.size()));
    std::vector<double> g(q);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        model.grad(grid.node(j), theta, g);
        for (std::size_t i = 0; i < q; ++i)
            partials[i][j] = g[i] * g[i];
    }
    std::vector<double> out(q);
    for (std::size_t i = 0; i < q; ++i) {
        out[i] = std::sqrt(integrate(partials[i], grid));
        if (!(out[i] > 0.0))
            throw DegenerateModel("norming_matrix: d_T entry " + std::to_string(i)
                                  + " is zero; the normalized deviation is undefined");
    }
    return out;
}

std::vector<double> norming_diagonal(NormingMode mode, RegressionModel const& model,
                                     std::span<double const> theta, TimeGrid const& grid)
{
    if (mode == NormingMode::d_T)
        return norming_matrix(model, theta, grid);
    return std::vector<double>(model.dimension(), std::sqrt(grid.horizon()));
}

double squared_distance(RegressionModel const& model, TimeGrid const& grid,
                        std::span<double const> tau1, std::span<double const> tau2)
{
    std::vector<double> diff(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double const t = grid.node(j);
        double const d = model.eval(t, tau1) - model.eval(t, tau2);
        diff[j] = d * d;
    }
    return integrate(diff, grid);
}

namespace {

std::vector<double> shifted(std::span<double const> theta, std::span<double const> norming,
                            std::span<double const> u)
{
    std::vector<double> tau(theta.size());
    for (std::size_t i = 0; i < tau.size(); ++i)
        tau[i] = theta[i] + u[i] / norming[i];
    return tau;
}

}  // namespace

double phi(RegressionModel const& model, std::span<double const> theta, TimeGrid const& grid,
           std::span<double const> norming, std::span<double const> u,
           std::span<double const> v)
{
    std::size_t const q = model.dimension();
    if (theta.size() != q || norming.size() != q || u.size() != q || v.size() != q)
        throw ContractViolation("phi: dimension mismatch");
    auto const tau_u = shifted(theta, norming, u);
    auto const tau_v = shifted(theta, norming, v);
    model.box().require_contains(tau_u, "phi(u)");
    model.box().require_contains(tau_v, "phi(v)");
    return squared_distance(model, grid, tau_u, tau_v);
}

SeparationEstimate estimate_separation_constants(RegressionModel const& model,
                                                 std::span<double const> theta,
                                                 TimeGrid const& grid,
                                                 std::span<double const> norming,
                                                 std::size_t n_pairs, std::uint64_t seed,
                                                 unsigned workers)
{
    if (n_pairs < 100)
        throw ContractViolation("estimate_separation_constants: need at least 100 pairs");
    std::size_t const q = model.dimension();
    if (theta.size() != q || norming.size() != q)
        throw ContractViolation("estimate_separation_constants: dimension mismatch");
    model.box().require_contains(theta, "estimate_separation_constants");

    constexpr std::size_t chunk = 256;
    std::size_t const n_chunks = (n_pairs + chunk - 1) / chunk;
    struct Partial
    {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        std::size_t used = 0;
    };
    std::vector<Partial> partials(n_chunks);
    auto const& box = model.box();

    parallel_for(n_chunks, workers, [&](std::size_t c) {
        auto engine = make_engine(mix64(seed, c));
        std::vector<std::uniform_real_distribution<double>> coord;
        for (std::size_t i = 0; i < q; ++i)
            coord.emplace_back(box.lower()[i], box.upper()[i]);
        std::vector<double> tau_u(q);
        std::vector<double> tau_v(q);
        Partial& out = partials[c];
        std::size_t const end = std::min(n_pairs, (c + 1) * chunk);
        for (std::size_t p = c * chunk; p < end; ++p) {
            double dist2 = 0.0;
            for (std::size_t i = 0; i < q; ++i) {
                tau_u[i] = coord[i](engine);
                tau_v[i] = coord[i](engine);
                double const du = norming[i] * (tau_u[i] - tau_v[i]);
                dist2 += du * du;
            }
            if (std::sqrt(dist2) <= 1e-9)
                continue;
            double const ratio = squared_distance(model, grid, tau_u, tau_v) / dist2;
            out.lo = std::min(out.lo, ratio);
            out.hi = std::max(out.hi, ratio);
            ++out.used;
        }
    });

    SeparationEstimate est{std::numeric_limits<double>::infinity(),
                           -std::numeric_limits<double>::infinity(), 0};
    for (auto const& p : partials) {
        est.c0_hat = std::min(est.c0_hat, p.lo);
        est.c1_hat = std::max(est.c1_hat, p.hi);
        est.n_pairs_used += p.used;
    }
    if (est.n_pairs_used == 0)
        throw ContractViolation("estimate_separation_constants: every sampled pair was degenerate");
    return est;
}

ExpModelConstants exp_model_constants(Regressors const& regressors, ParameterBox const& box,
                                      TimeGrid const& grid)
{
    std::size_t const q = regressors.dimension();
    if (q != box.dimension())
        throw ContractViolation("exp_model_constants: regressor and box dimensions differ");

    std::vector<std::vector<double>> y(grid.size(), std::vector<double>(q));
    double max_inner = -std::numeric_limits<double>::infinity();
    double min_inner = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.size(); ++j) {
        regressors.value(grid.node(j), y[j]);
        // Extremes of a linear form over a box sit at corners, coordinate by coordinate.
        double hi = 0.0;
        double lo = 0.0;
        for (std::size_t i = 0; i < q; ++i) {
            double const a = y[j][i] * box.lower()[i];
            double const b = y[j][i] * box.upper()[i];
            hi += std::max(a, b);
            lo += std::min(a, b);
        }
        max_inner = std::max(max_inner, hi);
        min_inner = std::min(min_inner, lo);
    }

    ExpModelConstants out;
    out.gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    std::vector<double> prod(grid.size());
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = a; b < q; ++b) {
            for (std::size_t j = 0; j < grid.size(); ++j)
                prod[j] = y[j][a] * y[j][b];
            double const value = integrate(prod, grid) / grid.horizon();
            out.gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = value;
            out.gram(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = value;
        }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(out.gram, Eigen::EigenvaluesOnly);
    out.lambda_min = eigen.eigenvalues().minCoeff();
    if (!(out.lambda_min > 1e-10))
        throw DegenerateModel("exp_model_constants: J_T is not positive definite (smallest "
                              "eigenvalue "
                              + std::to_string(out.lambda_min) + ")");
    out.trace = out.gram.trace();
    out.H = std::exp(max_inner);
    out.L = std::exp(min_inner);
    out.c0_theory = out.L * out.L * out.lambda_min;
    out.c1_theory = out.H * out.H * out.trace;
    return out;
}

}  // namespace ssg
