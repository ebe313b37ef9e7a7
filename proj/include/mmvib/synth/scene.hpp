#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmvib/core/types.hpp"

namespace mmvib::synth {

struct SinusoidComponent {
  double amplitude = 0.0;          // Pa
  double angular_frequency = 0.0;  // rad/s
  double phase = 0.0;              // rad, in [0, 2pi)
};

/// Speech as a superposition of sinusoids. A sampled waveform may be given
/// instead; it is decomposed into its DFT components at synthesis time.
struct SpeechWaveform {
  std::vector<SinusoidComponent> components;
  double duration = 0.0;
  RealSeries samples;  // optional, Pa
  double sample_rate = 0.0;

  bool is_sampled() const { return !samples.empty(); }
  void validate() const;
};

/// FFT decomposition of a sampled waveform into (P_i, w_i, phi_i), DC dropped.
std::vector<SinusoidComponent> decompose(std::span<const double> samples, double sample_rate);

struct Speaker {
  std::string label;
  Vec3 position = Vec3::Zero();
  SpeechWaveform waveform;
  std::vector<TimeInterval> active_intervals;  // sorted, non-overlapping
  std::vector<int> digits;                     // content per interval, -1 if unknown

  void validate(double scene_duration) const;
  bool active_at(double t) const;
};

/// Thin flexible surface driven by sound pressure. EI is carried for
/// completeness; the steady-state spatially averaged response does not use it.
struct MembraneObject {
  std::string name;
  Vec3 position = Vec3::Zero();
  double surface_area = 0.04;        // m^2
  double mass_per_length = 0.02;     // kg/m
  double damping = 10.0;             // kg/s
  double natural_frequency = kTwoPi * 180.0;  // rad/s
  double flexural_modulus = 1e-4;    // N m^2
  double static_reflectivity = 1.0;
  double static_shift_gain = 0.1;          // |S'/S - 1| during speech
  double static_interference_ratio = 0.8;  // |S_static| / alpha
  bool rigid = false;                      // walls and furniture: no vibration

  void validate() const;
};

struct RadarConfig {
  double start_frequency = 77e9;    // Hz
  double bandwidth = 4e9;           // Hz
  double chirp_slope = 4e9 / 60e-6; // Hz/s
  std::size_t samples_per_chirp = 128;
  std::size_t chirps_per_frame = 128;
  double frame_duration = 10.64e-3;  // s
  std::size_t rx_antennas = 4;
  double rx_spacing = 1.0;           // multiples of lambda/2
  double path_loss_exponent = 2.0;
  double self_noise_std = 0.02;      // complex std per IF sample
  double c = kSpeedOfLight;

  double chirp_duration() const { return bandwidth / chirp_slope; }
  /// Vibration (slow-time) sampling rate: one sample per chirp.
  double slow_time_rate() const { return static_cast<double>(chirps_per_frame) / frame_duration; }
  double fast_time_rate() const { return static_cast<double>(samples_per_chirp) / chirp_duration(); }
  double range_resolution() const { return c / (2.0 * bandwidth); }
  double max_range() const { return static_cast<double>(samples_per_chirp) * range_resolution(); }
  double wavelength() const { return c / start_frequency; }
  void validate() const;
};

/// Slow linear phase drift of every reflector's return (hardware imperfection);
/// this is what makes silent periods trace an arc in the IQ plane.
struct HardwareModel {
  double phase_drift = 1.0;        // rad/s
  double drift_rate_jitter = 0.2;  // per-object relative spread of the rate
};

struct RadarPose {
  Vec3 position = Vec3::Zero();
  double boresight_yaw = 0.0;  // rad, in the xy-plane
};

struct Scene {
  double duration = 0.0;
  std::vector<Speaker> speakers;
  std::vector<MembraneObject> objects;
  RadarPose radar_pose;
  HardwareModel hardware;
  double static_transition = 0.1;  // s, raised-cosine ramp between S_static and S'_static, centered on segment edges

  void validate() const;
};

/// Object range and azimuth seen from the radar (azimuth positive to the left).
struct Bearing {
  double range = 0.0;
  double azimuth = 0.0;
};
Bearing bearing_of(const RadarPose& pose, const Vec3& point);

}  // namespace mmvib::synth
