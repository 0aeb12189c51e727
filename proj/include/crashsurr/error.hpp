#pragma once

#include <stdexcept>
#include <string>

namespace crashsurr {

enum class ErrorKind {
  kShapeMismatch,
  kInvalidArgument,
  kNotFitted,
  kNonFinite,
  kStability,
  kIo,
  kFormat,
  kUnreachable,
  kDiverged,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShapeMismatch: return "shape_mismatch";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kNotFitted: return "not_fitted";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kStability: return "stability";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kUnreachable: return "unreachable";
    case ErrorKind::kDiverged: return "diverged";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable kind so the
// CLI can emit structured diagnostics.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace crashsurr
