#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace predit {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Carries the offending key so the CLI can report it verbatim.
class ConfigKeyError : public ConfigError {
 public:
  ConfigKeyError(std::string key, const std::string& what)
      : ConfigError(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

class DegenerateInterpolationError : public Error {
 public:
  using Error::Error;
};

class UnderfilledHistoryError : public Error {
 public:
  using Error::Error;
};

class HistoryOrderError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DegenerateRegressionError : public Error {
 public:
  using Error::Error;
};

/// An oracle evaluation failed while a sampler was running. `step()` is the
/// schedule index of the step that requested the evaluation.
class OracleFailure : public Error {
 public:
  OracleFailure(std::size_t step, const std::string& cause)
      : Error("oracle failed at step " + std::to_string(step) + ": " + cause),
        step_(step),
        cause_(cause) {}

  std::size_t step() const noexcept { return step_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  std::size_t step_;
  std::string cause_;
};

}  // namespace predit
