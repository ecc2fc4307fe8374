#pragma once

#include <stdexcept>
#include <string>

namespace ampc {

// Error taxonomy shared by the library and the CLI. Each class maps to a
// distinct process exit code so scripts can tell failure modes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// shape mismatch between operands
class DimensionError : public Error {
 public:
  using Error::Error;
};

// invalid argument value (empty batch, bad range, ...)
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// non-finite value produced or encountered
class NumericError : public Error {
 public:
  using Error::Error;
};

// bad or inconsistent run configuration
class ConfigError : public Error {
 public:
  using Error::Error;
};

// not enough data, malformed dataset
class DataError : public Error {
 public:
  using Error::Error;
};

// missing or corrupt checkpoint / run directory
class ArtifactError : public Error {
 public:
  using Error::Error;
};

// planner failure (all candidates invalid, ...)
class ControlError : public Error {
 public:
  using Error::Error;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int generic = 1;
inline constexpr int config = 2;
inline constexpr int data = 3;
inline constexpr int artifact = 4;
inline constexpr int numeric = 5;
}  // namespace exit_code

}  // namespace ampc
