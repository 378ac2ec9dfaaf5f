#pragma once

#include <stdexcept>
#include <string>

namespace optspace {

/// Broad failure classes. The CLI maps each one to its own exit code.
enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  Io,
  Parse,
  Numerical,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code for an error class (0 is reserved for success).
int exit_code(ErrorKind kind) noexcept;

}  // namespace optspace
