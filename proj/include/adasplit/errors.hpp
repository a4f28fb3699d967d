#pragma once

#include <stdexcept>
#include <string>

namespace adasplit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not line up (names the offending layer when known).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition between cooperating calls was broken (stale cache, missing grads).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad data handed to a pure function (label out of range, NaN input).
class InputError : public Error {
 public:
  using Error::Error;
};

class DegenerateBatchError : public InputError {
 public:
  using InputError::InputError;
};

/// An operation was invoked in the wrong protocol phase.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Unknown client id.
class RegistryError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

/// Runtime invariant breach (non-finite values, accounting mismatch).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& message, const std::string& file = "")
      : Error(format(file, line, message)), line_(line), detail_(message), file_(file) {}
  explicit ConfigError(const std::string& message) : ConfigError(0, message) {}

  /// 1-based line in the config file, 0 when the error is not tied to a line.
  int line() const { return line_; }
  const std::string& detail() const { return detail_; }
  const std::string& file() const { return file_; }

 private:
  static std::string format(const std::string& file, int line, const std::string& message) {
    std::string where = file;
    if (line > 0) where += (file.empty() ? "line " : ":") + std::to_string(line);
    return where.empty() ? message : where + ": " + message;
  }

  int line_ = 0;
  std::string detail_;
  std::string file_;
};

}  // namespace adasplit
