#pragma once

#include <span>

#include "mmvib/core/types.hpp"

namespace mmvib::amplify {

struct StftParams {
  std::size_t window = 256;
  std::size_t hop = 64;
};

/// Complex STFT, frames x (window/2+1) bins, periodic Hann analysis window.
struct STFTMatrix {
  ComplexMatrix values;  // rows = frames, cols = bins
  StftParams params;
  double frame_rate = 0.0;      // sample rate of the underlying series
  std::size_t signal_length = 0;

  std::size_t frames() const { return values.rows; }
  std::size_t bins() const { return values.cols; }
  double bin_hz(std::size_t k) const { return static_cast<double>(k) * frame_rate / static_cast<double>(params.window); }
  /// Sample index of the first sample of frame `t`.
  std::size_t frame_start(std::size_t t) const { return t * params.hop; }
  /// Center sample of frame `t`.
  std::size_t frame_center(std::size_t t) const { return t * params.hop + params.window / 2; }
};

std::vector<double> hann_window(std::size_t n);

/// Throws a parameter error if the shifted Hann windows do not sum to a constant.
void check_cola(const StftParams& params);

/// The signal is zero-padded at the end so the last frame covers the tail;
/// istft trims back to the original length. Where the overlap-added squared
/// window falls below kEdgeNormFloor of its steady-state value (the first and
/// last few dozen samples), istft divides by the floor instead, so those edge
/// samples are attenuated rather than reconstructed exactly.
inline constexpr double kEdgeNormFloor = 0.1;
STFTMatrix stft(std::span<const double> signal, double frame_rate, const StftParams& params = {});
RealSeries istft(const STFTMatrix& m);

}  // namespace mmvib::amplify
