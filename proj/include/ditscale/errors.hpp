#pragma once

#include <stdexcept>
#include <string>

namespace ditscale {

// Base for every error the library raises. The CLI maps subclasses onto exit
// codes: validation-like errors -> 2, numeric failures -> 3.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
  virtual const char *kind() const noexcept { return "error"; }
  virtual bool numeric() const noexcept { return false; }
};

class DomainError : public Error
{
public:
  using Error::Error;
  const char *kind() const noexcept override { return "domain_error"; }
  bool numeric() const noexcept override { return true; }
};

class ParseError : public Error
{
public:
  using Error::Error;
  const char *kind() const noexcept override { return "parse_error"; }
};

class ValidationError : public Error
{
public:
  using Error::Error;
  const char *kind() const noexcept override { return "validation_error"; }
};

class SingularityError : public Error
{
public:
  using Error::Error;
  const char *kind() const noexcept override { return "singularity"; }
  bool numeric() const noexcept override { return true; }
};

class NoInteriorMinimum : public Error
{
public:
  using Error::Error;
  const char *kind() const noexcept override { return "no_interior_minimum"; }
  bool numeric() const noexcept override { return true; }
};

} // namespace ditscale
