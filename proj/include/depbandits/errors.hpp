#pragma once

#include <stdexcept>
#include <string>

namespace depbandits {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter lies outside its allowable set, or a family's natural domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An observation is incompatible with the model (e.g. off-support reward).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid instance, space, or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was requested in a state where it is undefined.
class StateError : public Error {
 public:
  using Error::Error;
};

/// The select/update contract of a policy was broken.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// An operation was applied to a model family it does not support.
class TypeError : public Error {
 public:
  using Error::Error;
};

/// A structural assumption failed certification.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace depbandits
