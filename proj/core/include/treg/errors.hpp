#pragma once

#include <stdexcept>
#include <string>

namespace treg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration. The message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (simplex weights, noise budget, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class UnsupportedOperator : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised by the sampler when the latent leaves the finite / bounded region.
class DivergenceError : public Error {
 public:
  DivergenceError(int timestep, const std::string& what)
      : Error(what), timestep_(timestep) {}
  int timestep() const noexcept { return timestep_; }

 private:
  int timestep_;
};

}  // namespace treg
