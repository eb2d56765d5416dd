#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace turnpike {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed coefficient expression; `offset` is the byte position of the problem.
class SyntaxError : public Error
{
  public:
    SyntaxError(std::string const& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset)
    {
    }
    std::size_t offset() const noexcept { return offset_; }

  private:
    std::size_t offset_;
};

/// Evaluation outside the domain of a sub-expression (log of a nonpositive value, ...).
class DomainError : public Error
{
  public:
    DomainError(std::string const& what, std::string subexpression)
        : Error(what + " in '" + subexpression + "'"), subexpression_(std::move(subexpression))
    {
    }
    std::string const& subexpression() const noexcept { return subexpression_; }

  private:
    std::string subexpression_;
};

/// Input that violates a documented precondition (p >= 1, y0 outside E, ...).
class InvalidInput : public Error
{
  public:
    using Error::Error;
};

/// A numerical procedure failed (non-principal eigenvector, persistent loss of positivity, ...).
class NumericalError : public Error
{
  public:
    using Error::Error;
};

/// Truncation window too small, or a query outside the window.
class WindowError : public NumericalError
{
  public:
    using NumericalError::NumericalError;
};

/// The utility maximization problem has infinite value (a budget or value integral diverges).
class IllPosed : public Error
{
  public:
    using Error::Error;
};

}  // namespace turnpike
