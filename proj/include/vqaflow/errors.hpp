#pragma once

#include <stdexcept>
#include <string>

namespace vqaflow {

enum class ErrorKind {
  InvalidInput,
  Io,
  Format,
  Config,
  ProtocolViolation,
  AgentUnavailable,
  CassetteMiss,
  UnsalvageableBox,
  BudgetExceeded,
};

const char* to_string(ErrorKind kind);

/// Base exception for every failure the engine can raise. The kind is the
/// machine-readable taxonomy; what() carries the human diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vqaflow
