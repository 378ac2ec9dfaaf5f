#include "optspace/error.hpp"

namespace optspace {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Config: return "configuration error";
  }
  return "unknown error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return 2;
    case ErrorKind::DimensionMismatch: return 3;
    case ErrorKind::Io: return 4;
    case ErrorKind::Parse: return 5;
    case ErrorKind::Numerical: return 6;
    case ErrorKind::Config: return 7;
  }
  return 1;
}

}  // namespace optspace
