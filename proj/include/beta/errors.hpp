#pragma once

#include <stdexcept>
#include <string>

namespace beta {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value does not fit the declared encoding (bit-width, {0,1}, lane width).
class EncodingError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Accumulator or sum exceeded its modeled width. Never wraps silently.
class OverflowError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace beta
