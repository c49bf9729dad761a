#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ssg {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (length mismatch, bad scale, ...).
class ContractViolation : public Error
{
  public:
    using Error::Error;
};

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error
{
  public:
    ConfigError(std::string field, std::string const& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field))
    {}

    std::string const& field() const noexcept { return field_; }

  private:
    std::string field_;
};

/// A parameter left the box Θᶜ.
class DomainError : public Error
{
  public:
    DomainError(std::size_t coordinate, std::string const& message)
      : Error(message), coordinate_(coordinate)
    {}

    std::size_t coordinate() const noexcept { return coordinate_; }

  private:
    std::size_t coordinate_;
};

/// The model or a derived matrix is degenerate (zero norming entry, singular Gram matrix).
class DegenerateModel : public Error
{
  public:
    using Error::Error;
};

/// Non-finite data encountered during a search.
class DataError : public Error
{
  public:
    using Error::Error;
};

/// Every local refinement failed; carries the best lattice point.
class NonConvergence : public Error
{
  public:
    NonConvergence(std::string const& message, std::vector<double> best_lattice_point,
                   double best_lattice_value)
      : Error(message), best_point_(std::move(best_lattice_point)), best_value_(best_lattice_value)
    {}

    std::vector<double> const& best_point() const noexcept { return best_point_; }
    double best_value() const noexcept { return best_value_; }

  private:
    std::vector<double> best_point_;
    double best_value_;
};

/// Too many trials failed to converge in a Monte-Carlo run.
class RunFailure : public Error
{
  public:
    using Error::Error;
};

}  // namespace ssg
