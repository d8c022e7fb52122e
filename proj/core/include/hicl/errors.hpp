#pragma once

#include <stdexcept>
#include <string>

namespace hicl {

/// Non-finite value, invalid shape, or any other numeric-contract breach.
/// Thrown eagerly so a NaN cannot propagate silently through training.
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

/// File missing, unreadable, malformed on disk.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration value (violates a module invariant).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hicl
