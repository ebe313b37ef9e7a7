#include <algorithm>
#include <cmath>

#include "mmvib/cluster/cluster.hpp"
#include "mmvib/core/error.hpp"

namespace mmvib::cluster {

std::vector<double> spectral_envelope(const amplify::PowerSpectrogram& p, IndexInterval frames,
                                      const EnvelopeParams& params) {
  const std::size_t bins = p.values.cols;
  require(params.dimension >= 1, ErrorKind::Parameter, "envelope dimension must be >= 1");
  require(frames.length() >= 1 && frames.end <= p.values.rows, ErrorKind::EmptySelection,
          "envelope needs at least one frame inside the spectrogram");
  const std::size_t lo = params.bin_lo;
  const std::size_t hi = params.bin_hi == 0 ? bins - 1 : params.bin_hi;
  require(lo <= hi && hi < bins, ErrorKind::Parameter, "envelope bin range outside the spectrogram");

  const std::size_t width = hi - lo + 1;
  std::vector<double> peak(width, 0.0);
  for (std::size_t t = frames.begin; t < frames.end; ++t)
    for (std::size_t k = 0; k < width; ++k) peak[k] = std::max(peak[k], std::sqrt(std::max(p.values(t, lo + k), 0.0)));

  std::vector<double> smooth(width);
  for (std::size_t k = 0; k < width; ++k) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t j = k == 0 ? 0 : k - 1; j <= std::min(width - 1, k + 1); ++j, ++n) s += peak[j];
    smooth[k] = s / static_cast<double>(n);
  }

  std::vector<double> env(params.dimension);
  for (std::size_t i = 0; i < params.dimension; ++i) {
    const double x = params.dimension == 1 ? 0.0
                                           : static_cast<double>(i) * static_cast<double>(width - 1) /
                                                 static_cast<double>(params.dimension - 1);
    const auto j = std::min(static_cast<std::size_t>(x), width - 1);
    const double f = x - static_cast<double>(j);
    env[i] = j + 1 < width ? smooth[j] * (1.0 - f) + smooth[j + 1] * f : smooth[j];
  }
  double norm = 0.0;
  for (double v : env) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (auto& v : env) v /= norm;
  return env;
}

std::vector<double> build_feature(std::span<const std::vector<double>> envelopes) {
  require(!envelopes.empty(), ErrorKind::EmptySelection, "feature needs at least one envelope");
  std::vector<double> f;
  for (const auto& e : envelopes) {
    require(e.size() == envelopes.front().size(), ErrorKind::ShapeMismatch, "envelopes differ in dimension");
    f.insert(f.end(), e.begin(), e.end());
  }
  return f;
}

void FeatureMatrix::append(std::span<const double> r) {
  if (rows == 0 && cols == 0) cols = r.size();
  require(r.size() == cols, ErrorKind::ShapeMismatch, "feature rows differ in length (mismatched object count)");
  data.insert(data.end(), r.begin(), r.end());
  ++rows;
}

}  // namespace mmvib::cluster
