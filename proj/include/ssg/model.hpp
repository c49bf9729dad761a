#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssg/numerics.hpp"

namespace ssg {

/// Closed box Θᶜ = Π [lower_i, upper_i] with lower_i < upper_i.
class ParameterBox
{
  public:
    ParameterBox(std::vector<double> lower, std::vector<double> upper);

    std::size_t dimension() const noexcept { return lower_.size(); }
    std::vector<double> const& lower() const noexcept { return lower_; }
    std::vector<double> const& upper() const noexcept { return upper_; }
    double width(std::size_t i) const noexcept { return upper_[i] - lower_[i]; }
    double diameter() const noexcept;

    /// True when every coordinate lies within `slack`·width of the box.
    bool contains(std::span<double const> tau, double slack = 0.0) const noexcept;
    bool interior(std::span<double const> tau) const noexcept;
    std::vector<double> clamp(std::span<double const> tau) const;

    /// Throws DomainError naming the first offending coordinate.
    void require_contains(std::span<double const> tau, char const* what) const;

    /// All 2^q vertices.
    std::vector<std::vector<double>> corners() const;

  private:
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/*!
 * Regression function a(t, τ) with its parameter gradient.
 *
 * Implementations are immutable after construction and safe for concurrent
 * reads.
 */
class RegressionModel
{
  public:
    explicit RegressionModel(ParameterBox box) : box_(std::move(box)) {}
    virtual ~RegressionModel() = default;

    std::size_t dimension() const noexcept { return box_.dimension(); }
    ParameterBox const& box() const noexcept { return box_; }

    virtual double eval(double t, std::span<double const> tau) const = 0;
    virtual void grad(double t, std::span<double const> tau, std::span<double> out) const = 0;
    virtual std::string descriptor() const = 0;

    std::vector<double> gradient(double t, std::span<double const> tau) const;

    /// a(t_j, τ) at every grid node.
    std::vector<double> evaluate(TimeGrid const& grid, std::span<double const> tau) const;

  private:
    ParameterBox box_;
};

/// a(t, τ) = Σ_i τ_i t^i, i = 1..q.
class LinearModel final : public RegressionModel
{
  public:
    explicit LinearModel(ParameterBox box) : RegressionModel(std::move(box)) {}
    double eval(double t, std::span<double const> tau) const override;
    void grad(double t, std::span<double const> tau, std::span<double> out) const override;
    std::string descriptor() const override { return "linear"; }
};

/// a(t, τ) = τ (q = 1).
class ConstantModel final : public RegressionModel
{
  public:
    explicit ConstantModel(ParameterBox box);
    double eval(double t, std::span<double const> tau) const override;
    void grad(double t, std::span<double const> tau, std::span<double> out) const override;
    std::string descriptor() const override { return "constant"; }
};

/// Bounded regressor functions y(t) ∈ ℝ^q.
class Regressors
{
  public:
    virtual ~Regressors() = default;
    virtual std::size_t dimension() const = 0;
    virtual void value(double t, std::span<double> out) const = 0;
    virtual std::string descriptor() const = 0;
};

/// y(t) ≡ c.
class ConstantRegressors final : public Regressors
{
  public:
    explicit ConstantRegressors(std::vector<double> values);
    std::size_t dimension() const override { return values_.size(); }
    void value(double t, std::span<double> out) const override;
    std::string descriptor() const override;

  private:
    std::vector<double> values_;
};

/// y_1 = 1, y_i(t) = cos((i−1)·ω·t) for i >= 2.
class CosineRegressors final : public Regressors
{
  public:
    CosineRegressors(std::size_t dimension, double omega);
    std::size_t dimension() const override { return dimension_; }
    void value(double t, std::span<double> out) const override;
    std::string descriptor() const override;

  private:
    std::size_t dimension_;
    double omega_;
};

/// Rows "t y_1 … y_q" interpolated linearly; '#' starts a comment.
class TabulatedRegressors final : public Regressors
{
  public:
    TabulatedRegressors(std::vector<double> times, std::vector<std::vector<double>> rows);
    static std::shared_ptr<TabulatedRegressors> load(std::filesystem::path const& path);

    std::size_t dimension() const override { return rows_.front().size(); }
    void value(double t, std::span<double> out) const override;
    std::string descriptor() const override;
    double last_time() const noexcept { return times_.back(); }

  private:
    std::vector<double> times_;
    std::vector<std::vector<double>> rows_;
};

/// a(t, τ) = exp⟨τ, y(t)⟩.
class ExponentialModel final : public RegressionModel
{
  public:
    ExponentialModel(ParameterBox box, std::shared_ptr<Regressors const> regressors);
    double eval(double t, std::span<double const> tau) const override;
    void grad(double t, std::span<double const> tau, std::span<double> out) const override;
    std::string descriptor() const override;

    Regressors const& regressors() const noexcept { return *regressors_; }

  private:
    std::shared_ptr<Regressors const> regressors_;
};

//---------------------------------------------------------------------------//
// Norming and the normalized increment functional
//---------------------------------------------------------------------------//

enum class NormingMode
{
    d_T,  ///< diagonal of gradient L₂ norms at θ
    s_T,  ///< √T·I_q
};

std::string_view to_string(NormingMode mode) noexcept;

/// d_{iT}(θ) = (∫ (∂a/∂θ_i)² dt)^{1/2}; throws DegenerateModel on a zero entry.
std::vector<double> norming_matrix(RegressionModel const& model, std::span<double const> theta,
                                   TimeGrid const& grid);

/// Diagonal of the configured norming matrix.
std::vector<double> norming_diagonal(NormingMode mode, RegressionModel const& model,
                                     std::span<double const> theta, TimeGrid const& grid);

/// ∫ (a(t, τ₁) − a(t, τ₂))² dt.
double squared_distance(RegressionModel const& model, TimeGrid const& grid,
                        std::span<double const> tau1, std::span<double const> tau2);

/// Φ_T(u, v) with Δ(t, u) = a(t, θ + N⁻¹u) − a(t, θ).
double phi(RegressionModel const& model, std::span<double const> theta, TimeGrid const& grid,
           std::span<double const> norming, std::span<double const> u,
           std::span<double const> v);

struct SeparationEstimate
{
    double c0_hat = 0.0;
    double c1_hat = 0.0;
    std::size_t n_pairs_used = 0;
};

/*!
 * Empirical bracket of Φ_T(u, v)/‖u − v‖² over pairs drawn uniformly from
 * U_T(θ) = N(Θᶜ − θ). Pairs with ‖u − v‖ <= 1e-9 are skipped.
 *
 * Pairs are drawn in fixed chunks with derived seeds, so the result does not
 * depend on `workers`.
 */
SeparationEstimate estimate_separation_constants(RegressionModel const& model,
                                                 std::span<double const> theta,
                                                 TimeGrid const& grid,
                                                 std::span<double const> norming,
                                                 std::size_t n_pairs, std::uint64_t seed,
                                                 unsigned workers = 1);

struct ExpModelConstants
{
    Eigen::MatrixXd gram;  ///< J_T = (T⁻¹ ∫ y_i y_j dt)
    double H = 0.0;
    double L = 0.0;
    double lambda_min = 0.0;
    double trace = 0.0;
    double c0_theory = 0.0;  ///< L²·λ_min(J_T)
    double c1_theory = 0.0;  ///< H²·Tr J_T
};

/// Gram matrix and the H/L extremes of exp⟨y(t), τ⟩ over grid nodes × box corners.
ExpModelConstants exp_model_constants(Regressors const& regressors, ParameterBox const& box,
                                      TimeGrid const& grid);

}  // namespace ssg
