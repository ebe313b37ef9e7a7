#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Core>

namespace mmvib {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using RealSeries = std::vector<double>;
using ComplexSeries = std::vector<cplx>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 3.0e8;
inline constexpr double kSpeedOfSound = 343.0;

/// Half-open interval of sample (or frame) indices.
struct IndexInterval {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end > begin ? end - begin : 0; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexInterval&, const IndexInterval&) = default;
};

/// Time interval in seconds, [start, end).
struct TimeInterval {
  double start = 0.0;
  double end = 0.0;
  double duration() const { return end - start; }
  bool contains(double t) const { return t >= start && t < end; }
};

/// Dense row-major real matrix with named axes left to the caller.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cplx> data;

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
  cplx& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

}  // namespace mmvib
