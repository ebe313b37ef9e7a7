#include "mmvib/core/stats.hpp"

#include <algorithm>
#include <cmath>

#include "mmvib/core/error.hpp"

namespace mmvib::stats {

double mean(std::span<const double> x) {
  require(!x.empty(), ErrorKind::InsufficientData, "mean of empty series");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

double median(std::span<const double> x) {
  require(!x.empty(), ErrorKind::InsufficientData, "median of empty series");
  std::vector<double> v(x.begin(), x.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mad(std::span<const double> x) {
  const double m = median(x);
  std::vector<double> dev(x.size());
  std::transform(x.begin(), x.end(), dev.begin(), [m](double v) { return std::abs(v - m); });
  return median(dev);
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::ShapeMismatch, "correlation of series with different lengths");
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  require(saa > 0.0 && sbb > 0.0, ErrorKind::UndefinedStatistic, "correlation with a constant series");
  return sab / std::sqrt(saa * sbb);
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

RealSeries unwrap(std::span<const double> phase) {
  RealSeries out(phase.begin(), phase.end());
  double offset = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double d = phase[i] - phase[i - 1];
    // Same wrap rule as numpy: map d into [-pi, pi), keep +pi for positive jumps.
    double dm = std::fmod(d + kPi, kTwoPi);
    if (dm < 0) dm += kTwoPi;
    dm -= kPi;
    if (dm == -kPi && d > 0) dm = kPi;
    if (std::abs(d) >= kPi) offset += dm - d;
    out[i] = phase[i] + offset;
  }
  return out;
}

RealSeries angles(std::span<const cplx> z) {
  RealSeries out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [](cplx v) { return std::arg(v); });
  return out;
}

}  // namespace mmvib::stats
