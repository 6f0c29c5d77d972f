#pragma once

#include <stdexcept>
#include <string>

namespace bi {

/// Base class for every error raised by the library. `module()` names the
/// component that failed so the CLI can emit a machine-readable record.
class Error : public std::runtime_error
{
public:
  Error(std::string module, const std::string& what)
    : std::runtime_error(what), module_(std::move(module))
  {
  }
  const std::string& module() const noexcept { return module_; }

private:
  std::string module_;
};

/// Invalid input: bad parameters, violated preconditions, inconsistent grids.
class InvalidArgument : public Error
{
public:
  using Error::Error;
};

/// A computation ran but could not deliver a trustworthy value
/// (divergent integral, constraint violation, non-convergence).
class NumericalFailure : public Error
{
public:
  using Error::Error;
};

/// |grad u| exceeded 1 beyond tolerance where a spacelike field was required.
class ConstraintViolation : public NumericalFailure
{
public:
  using NumericalFailure::NumericalFailure;
};

} // namespace bi
