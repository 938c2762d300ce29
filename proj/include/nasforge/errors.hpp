// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nasforge {

// Malformed structured-text input: unknown/duplicate/missing fields, bad
// types. Carries a path into the document ("/blocks/2/kernels").
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Well-formed input that violates a domain invariant (divisibility,
// shape chaining, empty menu, ...).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Transport-level failures. Subclasses let callers tell a dead peer from a
// slow one from a confused one.
class NetworkError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TimeoutError : public NetworkError {
  using NetworkError::NetworkError;
};

class ConnectionLostError : public NetworkError {
  using NetworkError::NetworkError;
};

class ProtocolError : public NetworkError {
  using NetworkError::NetworkError;
};

class BindError : public NetworkError {
  using NetworkError::NetworkError;
};

}  // namespace nasforge
