#include "mmvib/amplify/spectral_subtraction.hpp"

#include <algorithm>
#include <cmath>

#include "mmvib/core/error.hpp"

namespace mmvib::amplify {

NoiseProfile estimate_noise_profile(const STFTMatrix& y, std::span<const std::size_t> noise_frames,
                                    std::size_t max_frames) {
  NoiseProfile p;
  p.magnitude.assign(y.bins(), 0.0);
  for (std::size_t t : noise_frames) {
    if (p.frames_used >= max_frames) break;
    require(t < y.frames(), ErrorKind::Parameter, "noise frame index out of range");
    for (std::size_t k = 0; k < y.bins(); ++k) p.magnitude[k] += std::abs(y.values(t, k));
    ++p.frames_used;
  }
  require(p.frames_used > 0, ErrorKind::InsufficientData, "no non-speech frames available for the noise profile");
  for (auto& v : p.magnitude) v /= static_cast<double>(p.frames_used);
  return p;
}

STFTMatrix PolarSpectrum::to_complex() const {
  STFTMatrix m;
  m.params = params;
  m.frame_rate = frame_rate;
  m.signal_length = signal_length;
  m.values = ComplexMatrix(magnitude.rows, magnitude.cols);
  for (std::size_t i = 0; i < magnitude.data.size(); ++i) m.values.data[i] = std::polar(magnitude.data[i], phase.data[i]);
  return m;
}

PolarSpectrum spectral_subtract(const STFTMatrix& y, const NoiseProfile& noise, const SubtractionParams& params) {
  require(params.over_subtraction_alpha >= 1.0, ErrorKind::Parameter, "over-subtraction alpha must be >= 1");
  require(params.spectral_floor_beta > 0.0 && params.spectral_floor_beta < 1.0, ErrorKind::Parameter,
          "spectral floor beta must be in (0, 1)");
  require(noise.magnitude.size() == y.bins(), ErrorKind::ShapeMismatch, "noise profile bins do not match the STFT");
  PolarSpectrum out;
  out.params = y.params;
  out.frame_rate = y.frame_rate;
  out.signal_length = y.signal_length;
  out.magnitude = RealMatrix(y.frames(), y.bins());
  out.phase = RealMatrix(y.frames(), y.bins());
  for (std::size_t t = 0; t < y.frames(); ++t) {
    for (std::size_t k = 0; k < y.bins(); ++k) {
      const cplx v = y.values(t, k);
      const double mag = std::abs(v);
      out.magnitude(t, k) = std::max(mag - params.over_subtraction_alpha * noise.magnitude[k],
                                     params.spectral_floor_beta * mag);
      out.phase(t, k) = std::arg(v);
    }
  }
  return out;
}

PowerSpectrogram auto_power_spectrum(const STFTMatrix& x) {
  PowerSpectrogram p;
  p.params = x.params;
  p.frame_rate = x.frame_rate;
  p.values = RealMatrix(x.frames(), x.bins());
  for (std::size_t i = 0; i < x.values.data.size(); ++i) {
    const cplx v = x.values.data[i];
    p.values.data[i] = (v * std::conj(v)).real();
  }
  return p;
}

PowerSpectrogram auto_power_spectrum(const PolarSpectrum& x) {
  PowerSpectrogram p;
  p.params = x.params;
  p.frame_rate = x.frame_rate;
  p.values = RealMatrix(x.magnitude.rows, x.magnitude.cols);
  for (std::size_t i = 0; i < x.magnitude.data.size(); ++i) p.values.data[i] = x.magnitude.data[i] * x.magnitude.data[i];
  return p;
}

}  // namespace mmvib::amplify
