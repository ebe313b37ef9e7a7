#include "mmvib/synth/acoustics.hpp"

#include <cmath>

#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"

namespace mmvib::synth {
namespace {

double distance_checked(const Speaker& speaker, const Vec3& point) {
  const double r = (point - speaker.position).norm();
  require(r > 1e-9, ErrorKind::DegenerateGeometry, "evaluation point coincides with speaker " + speaker.label);
  return r;
}

double sample_waveform(const SpeechWaveform& w, double t) {
  const double x = t * w.sample_rate;
  if (x < 0.0) return 0.0;
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= w.samples.size()) return i < w.samples.size() ? w.samples[i] : 0.0;
  const double f = x - static_cast<double>(i);
  return w.samples[i] * (1.0 - f) + w.samples[i + 1] * f;
}

// Band-limited resampling of a sampled waveform to `rate`, duration preserved.
RealSeries resample(std::span<const double> x, double from, double to) {
  const std::size_t n_out = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * to / from));
  const auto spec = fft::rfft(x);
  ComplexSeries out_spec(n_out / 2 + 1, cplx(0.0));
  const std::size_t keep = std::min(out_spec.size(), spec.size());
  const double scale = static_cast<double>(n_out) / static_cast<double>(x.size());
  for (std::size_t k = 0; k < keep; ++k) out_spec[k] = spec[k] * scale;
  return fft::irfft(out_spec, n_out);
}

}  // namespace

double sound_pressure(const Speaker& speaker, const Vec3& point, double t) {
  const double r = distance_checked(speaker, point);
  const double te = t - r / kSpeedOfSound;
  if (!speaker.active_at(te)) return 0.0;
  if (speaker.waveform.is_sampled()) return sample_waveform(speaker.waveform, te) / r;
  double p = 0.0;
  for (const auto& c : speaker.waveform.components) p += (c.amplitude / r) * std::cos(c.angular_frequency * te + c.phase);
  return p;
}

std::vector<SinusoidComponent> pressure_components_at(const Speaker& speaker, const Vec3& point) {
  const double r = distance_checked(speaker, point);
  std::vector<SinusoidComponent> out;
  for (const auto& c : speaker.waveform.components) {
    double phase = std::fmod(c.phase - c.angular_frequency * r / kSpeedOfSound, kTwoPi);
    if (phase < 0.0) phase += kTwoPi;
    out.push_back({c.amplitude / r, c.angular_frequency, phase});
  }
  return out;
}

double membrane_gain(const MembraneObject& o, double w) {
  if (o.rigid) return 0.0;
  const double w0 = o.natural_frequency;
  const double a = w0 * w0 - w * w;
  const double b = w * o.damping / o.mass_per_length;
  return o.surface_area / (o.mass_per_length * std::sqrt(a * a + b * b));
}

double membrane_displacement(const MembraneObject& object, std::span<const SinusoidComponent> pressure, double t) {
  double d = 0.0;
  for (const auto& c : pressure) d += c.amplitude * membrane_gain(object, c.angular_frequency) * std::cos(c.angular_frequency * t + c.phase);
  return d;
}

RealSeries displacement_series(const MembraneObject& object, const Speaker& speaker, double rate, std::size_t count) {
  RealSeries d(count, 0.0);
  if (object.rigid || speaker.active_intervals.empty()) return d;
  const double r = distance_checked(speaker, object.position);
  const double delay = r / kSpeedOfSound;

  if (!speaker.waveform.is_sampled()) {
    const auto comps = speaker.waveform.components;
    std::vector<double> gain(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) gain[i] = comps[i].amplitude / r * membrane_gain(object, comps[i].angular_frequency);
    for (std::size_t s = 0; s < count; ++s) {
      const double te = static_cast<double>(s) / rate - delay;
      if (!speaker.active_at(te)) continue;
      double v = 0.0;
      for (std::size_t i = 0; i < comps.size(); ++i) v += gain[i] * std::cos(comps[i].angular_frequency * te + comps[i].phase);
      d[s] = v;
    }
    return d;
  }

  // Sampled waveform: each DFT bin is one sinusoidal component; scaling the
  // bins by 1/r, the membrane gain and the delay phasor and transforming back
  // evaluates the same sum on the sample grid.
  const auto& w = speaker.waveform;
  RealSeries x(w.samples.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = speaker.active_at(static_cast<double>(i) / w.sample_rate) ? w.samples[i] : 0.0;
  if (std::abs(w.sample_rate - rate) > 1e-9 * rate) x = resample(x, w.sample_rate, rate);

  const std::size_t pad = static_cast<std::size_t>(std::ceil(delay * rate)) + 64;
  const std::size_t n = fft::good_size(std::max(count, x.size()) + pad);
  x.resize(n, 0.0);
  auto spec = fft::rfft(x);
  spec[0] = 0.0;
  if (n % 2 == 0) spec.back() = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double wk = kTwoPi * static_cast<double>(k) * rate / static_cast<double>(n);
    spec[k] *= membrane_gain(object, wk) / r * std::polar(1.0, -wk * delay);
  }
  const auto full = fft::irfft(spec, n);
  std::copy(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(count), d.begin());
  return d;
}

}  // namespace mmvib::synth
