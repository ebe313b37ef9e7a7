#pragma once

#include <array>
#include <span>
#include <vector>

#include "mmvib/core/types.hpp"

namespace mmvib::amplify {

/// One biquad section, b0..b2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 2> a{};
};

struct SosFilter {
  std::vector<Biquad> sections;
  double sample_rate = 0.0;

  /// Complex frequency response of a single (causal) pass at `hz`.
  cplx response(double hz) const;
};

/// Digital Butterworth bandpass built from an analog prototype of the given
/// order (bilinear transform with prewarping). Order 4 yields 8 poles.
SosFilter butterworth_bandpass(double lo_hz, double hi_hz, double sample_rate, int order = 4);

/// Causal cascade filtering, zero initial state.
RealSeries sos_filter(const SosFilter& filter, std::span<const double> x);

/// Forward-backward (zero-phase) filtering with odd-extension padding and
/// steady-state initial conditions. Magnitude response is |H|^2.
RealSeries sos_filtfilt(const SosFilter& filter, std::span<const double> x);

/// Zero-phase 4th-order Butterworth bandpass; `sample_rate` is the series rate.
/// Throws a parameter error unless 0 < lo < hi < sample_rate/2.
RealSeries bandpass_filter(std::span<const double> signal, double lo_hz, double hi_hz, double sample_rate);

/// Same filter applied to the real and imaginary parts independently.
ComplexSeries bandpass_filter(std::span<const cplx> signal, double lo_hz, double hi_hz, double sample_rate);

/// |analytic signal| via the FFT Hilbert transform.
RealSeries analytic_envelope(std::span<const double> x);

/// Centered moving average with a window of `width` samples (shrinks at edges).
RealSeries moving_average(std::span<const double> x, std::size_t width);

}  // namespace mmvib::amplify
