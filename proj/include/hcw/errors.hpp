#pragma once

#include <stdexcept>
#include <string>

namespace hcw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument of m, mu or mu_dot lies outside [-domain_bound, domain_bound].
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidCoefficient : public Error {
 public:
  using Error::Error;
};

class SingularMetric : public Error {
 public:
  using Error::Error;
};

class InvalidDispersion : public Error {
 public:
  using Error::Error;
};

class UnsupportedLink : public Error {
 public:
  using Error::Error;
};

class EmptyArmSet : public Error {
 public:
  using Error::Error;
};

/// The chosen arm is not a member of the round's arm set.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

class InvalidAngle : public Error {
 public:
  using Error::Error;
};

class InvalidProbability : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration. `path()` names the offending field in
/// dotted form, e.g. "environment.dispersion.g".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace hcw
