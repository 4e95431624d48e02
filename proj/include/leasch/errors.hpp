#pragma once

#include <stdexcept>
#include <string>

namespace leasch {

// Error taxonomy shared by every module. The CLI maps ConfigError and
// DimensionError to exit code 2, everything else to 3.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct StateError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct ContractViolation : Error {
  using Error::Error;
};

}  // namespace leasch
