#pragma once

#include <stdexcept>
#include <string>

namespace tmdcore {

// Malformed or out-of-contract input data (bad indices, non-finite values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: depth, weight presets, norms, budgets.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Oracle paths refuse problems beyond their enumeration limits.
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system and parse failures while reading or writing artifacts.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A distance cache whose header does not match the requested computation.
class CacheMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Arithmetic left the representable range (e.g. tree-norm walk counts overflow).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tmdcore
