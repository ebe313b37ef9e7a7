#include "mmvib/core/error.hpp"

namespace mmvib {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::DegenerateGeometry: return "degenerate geometry";
    case ErrorKind::UndefinedStatistic: return "undefined statistic";
    case ErrorKind::EmptySelection: return "empty selection";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::DegenerateFit: return "degenerate fit";
    case ErrorKind::CalibrationImpossible: return "calibration impossible";
    case ErrorKind::Fitting: return "fitting error";
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace mmvib
