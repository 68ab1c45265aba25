#pragma once

#include <stdexcept>
#include <string>

namespace dcmmi {

// Invalid option/parameter values (bad attribute count, alpha out of range, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input files (Q-matrix / response CSV, fit JSON).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite or impossible quantities met during computation.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dcmmi
