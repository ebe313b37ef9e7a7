#pragma once

#include <stdexcept>
#include <string>

namespace mmvib {

enum class ErrorKind {
  Parameter,
  Configuration,
  DegenerateGeometry,
  UndefinedStatistic,
  EmptySelection,
  InsufficientData,
  DegenerateFit,
  CalibrationImpossible,
  Fitting,
  ShapeMismatch,
  Io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` lets callers branch on the
/// failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace mmvib
