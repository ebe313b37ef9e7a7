#pragma once

#include <span>

#include "mmvib/amplify/stft.hpp"
#include "mmvib/core/types.hpp"

namespace mmvib::amplify {

struct NoiseProfile {
  std::vector<double> magnitude;  // per-bin mean |Y| over the noise frames
  std::size_t frames_used = 0;
};

/// Mean magnitude over the listed frames (in order, at most `max_frames`).
NoiseProfile estimate_noise_profile(const STFTMatrix& y, std::span<const std::size_t> noise_frames,
                                    std::size_t max_frames = 20);

struct SubtractionParams {
  double over_subtraction_alpha = 2.0;
  double spectral_floor_beta = 0.01;
};

/// Magnitude/phase form of a spectrum. Spectral subtraction returns this so
/// the phase it carries is the exact bit pattern of arg(Y); rebuilding the
/// Cartesian form would round it.
struct PolarSpectrum {
  RealMatrix magnitude;  // frames x bins
  RealMatrix phase;      // radians, frames x bins
  StftParams params;
  double frame_rate = 0.0;
  std::size_t signal_length = 0;

  STFTMatrix to_complex() const;
};

/// |X| = max(|Y| - alpha*D, beta*|Y|), phase taken from Y unchanged.
PolarSpectrum spectral_subtract(const STFTMatrix& y, const NoiseProfile& noise, const SubtractionParams& params = {});

struct PowerSpectrogram {
  RealMatrix values;  // frames x bins, nonnegative
  StftParams params;
  double frame_rate = 0.0;
};

/// P = X * conj(X) per cell.
PowerSpectrogram auto_power_spectrum(const STFTMatrix& x);
PowerSpectrogram auto_power_spectrum(const PolarSpectrum& x);

}  // namespace mmvib::amplify
