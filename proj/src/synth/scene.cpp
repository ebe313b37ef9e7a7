#include "mmvib/synth/scene.hpp"

#include <cmath>

#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"

namespace mmvib::synth {

void SpeechWaveform::validate() const {
  for (const auto& c : components) {
    require(c.amplitude >= 0.0, ErrorKind::Configuration, "speech component amplitude must be >= 0");
    require(c.angular_frequency > 0.0, ErrorKind::Configuration, "speech component frequency must be > 0");
    require(c.phase >= 0.0 && c.phase < kTwoPi, ErrorKind::Configuration, "speech component phase must be in [0, 2pi)");
  }
  if (is_sampled()) require(sample_rate > 0.0, ErrorKind::Configuration, "sampled waveform needs a sample rate");
}

std::vector<SinusoidComponent> decompose(std::span<const double> samples, double sample_rate) {
  require(sample_rate > 0.0, ErrorKind::Parameter, "sample rate must be positive");
  const std::size_t n = samples.size();
  const auto spec = fft::rfft(samples);
  std::vector<SinusoidComponent> out;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const bool nyquist = (n % 2 == 0) && k == n / 2;
    const double amp = std::abs(spec[k]) * (nyquist ? 1.0 : 2.0) / static_cast<double>(n);
    if (amp == 0.0) continue;
    double phase = std::arg(spec[k]);
    if (phase < 0.0) phase += kTwoPi;
    if (phase >= kTwoPi) phase = 0.0;
    out.push_back({amp, kTwoPi * static_cast<double>(k) * sample_rate / static_cast<double>(n), phase});
  }
  return out;
}

void Speaker::validate(double scene_duration) const {
  waveform.validate();
  double prev_end = -1.0;
  for (const auto& iv : active_intervals) {
    require(iv.end > iv.start, ErrorKind::Configuration, "speaker " + label + ": empty active interval");
    require(iv.start >= prev_end, ErrorKind::Configuration, "speaker " + label + ": intervals must be sorted and disjoint");
    require(iv.start >= 0.0 && iv.end <= scene_duration + 1e-9, ErrorKind::Configuration,
            "speaker " + label + ": interval outside the scene duration");
    prev_end = iv.end;
  }
  require(digits.empty() || digits.size() == active_intervals.size(), ErrorKind::Configuration,
          "speaker " + label + ": digits must align with active intervals");
}

bool Speaker::active_at(double t) const {
  for (const auto& iv : active_intervals)
    if (iv.contains(t)) return true;
  return false;
}

void MembraneObject::validate() const {
  require(surface_area > 0.0 && mass_per_length > 0.0 && damping > 0.0 && natural_frequency > 0.0,
          ErrorKind::Configuration, "object " + name + ": S, m, B and w0 must be positive");
  require(static_reflectivity >= 0.0, ErrorKind::Configuration, "object " + name + ": reflectivity must be >= 0");
  require(static_interference_ratio >= 0.0 && static_shift_gain >= 0.0, ErrorKind::Configuration,
          "object " + name + ": static interference parameters must be >= 0");
}

void RadarConfig::validate() const {
  require(start_frequency > 0.0 && bandwidth > 0.0 && chirp_slope > 0.0, ErrorKind::Configuration,
          "radar frequencies must be positive");
  require(samples_per_chirp >= 8, ErrorKind::Configuration, "need at least 8 fast-time samples per chirp");
  require(chirps_per_frame >= 1 && frame_duration > 0.0, ErrorKind::Configuration, "invalid frame timing");
  require(chirp_duration() <= frame_duration / static_cast<double>(chirps_per_frame) + 1e-12, ErrorKind::Configuration,
          "chirp duration exceeds the chirp period");
  require(rx_antennas >= 1 && rx_spacing > 0.0, ErrorKind::Configuration, "invalid antenna array");
  require(self_noise_std >= 0.0 && path_loss_exponent >= 0.0, ErrorKind::Configuration, "invalid noise or path loss");
}

void Scene::validate() const {
  require(duration > 0.0, ErrorKind::Configuration, "scene duration must be positive");
  require(!objects.empty(), ErrorKind::Configuration, "scene has no objects");
  require(static_transition >= 0.0, ErrorKind::Configuration, "static transition must be >= 0");
  for (const auto& s : speakers) s.validate(duration);
  for (const auto& o : objects) o.validate();
}

Bearing bearing_of(const RadarPose& pose, const Vec3& point) {
  const Vec3 v = point - pose.position;
  const Vec3 forward(std::cos(pose.boresight_yaw), std::sin(pose.boresight_yaw), 0.0);
  const Vec3 left(-std::sin(pose.boresight_yaw), std::cos(pose.boresight_yaw), 0.0);
  return {v.norm(), std::atan2(v.dot(left), v.dot(forward))};
}

}  // namespace mmvib::synth
