#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmvib/amplify/stft.hpp"
#include "mmvib/synth/scene.hpp"

namespace mmvib::synth {

/// Anything that can hand out radar chirps (rx x fast-time, row-major). A
/// chirp index counts across frames: chirp = frame * chirps_per_frame + k.
class CubeSource {
 public:
  virtual ~CubeSource() = default;
  virtual const RadarConfig& config() const = 0;
  virtual std::size_t frames() const = 0;
  virtual void read_chirp(std::size_t chirp, std::span<cplx> out) const = 0;

  /// Whole frame, chirps x rx x fast-time.
  void read_frame(std::size_t frame, std::span<cplx> out) const;

  std::size_t chirp_size() const { return config().rx_antennas * config().samples_per_chirp; }
  std::size_t frame_size() const { return config().chirps_per_frame * chirp_size(); }
  std::size_t slow_time_samples() const { return frames() * config().chirps_per_frame; }
};

/// Complex IF samples indexed (frame, chirp, rx, fast-time).
class RadarCube : public CubeSource {
 public:
  RadarCube() = default;
  RadarCube(RadarConfig config, std::size_t frames);

  const RadarConfig& config() const override { return config_; }
  std::size_t frames() const override { return frames_; }
  void read_chirp(std::size_t chirp, std::span<cplx> out) const override;

  cplx& at(std::size_t frame, std::size_t chirp, std::size_t rx, std::size_t n) { return samples_[index(frame, chirp, rx, n)]; }
  const cplx& at(std::size_t frame, std::size_t chirp, std::size_t rx, std::size_t n) const {
    return samples_[index(frame, chirp, rx, n)];
  }
  std::span<cplx> frame_span(std::size_t frame) { return {samples_.data() + frame * frame_size(), frame_size()}; }
  const std::vector<cplx>& samples() const { return samples_; }

 private:
  std::size_t index(std::size_t f, std::size_t c, std::size_t r, std::size_t n) const {
    return ((f * config_.chirps_per_frame + c) * config_.rx_antennas + r) * config_.samples_per_chirp + n;
  }
  RadarConfig config_;
  std::size_t frames_ = 0;
  std::vector<cplx> samples_;
};

struct GroundTruthOptions {
  amplify::StftParams stft;
  double band_lo = 50.0;
  double band_hi = 1000.0;
  bool compute_spectra = true;  // clean STFTs and ideal masks
};

struct ObjectTruth {
  std::string name;
  double range = 0.0;    // m
  double azimuth = 0.0;  // rad
  std::size_t range_bin = 0;
  std::size_t angle_bin = 0;   // on the default 64-bin angle grid
  double amplitude = 0.0;      // alpha = reflectivity / R0^ple
  cplx cell_gain;              // range-window x angle-steering gain at (range_bin, angle_bin)
  double cell_phase_noise_std = 0.0;  // rad per slow-time sample at that cell
  RealSeries displacement;     // m, slow-time rate
  RealSeries vibration_phase;  // 4 pi f_c d / c
  RealSeries hardware_phase;   // drift term, rad
  cplx static_silence;                 // S_static
  std::vector<cplx> static_speech;     // S'_static per speech segment
  amplify::STFTMatrix clean_stft;      // STFT of the bandpassed vibration phase
  RealMatrix speech_mask, noise_mask;  // ideal ratio masks, frames x bins
};

struct SpeechSegmentTruth {
  TimeInterval interval;
  IndexInterval samples;
  int speaker = -1;  // index into GroundTruth::labels
  int digit = -1;
};

struct GroundTruth {
  double sample_rate = 0.0;
  std::size_t samples = 0;
  std::vector<std::string> labels;
  std::vector<SpeechSegmentTruth> segments;  // sorted; union of all speakers' intervals
  std::vector<ObjectTruth> objects;
  GroundTruthOptions options;

  /// Segment index per slow-time sample, -1 during silence.
  std::vector<int> segment_index() const;
};

inline constexpr std::size_t kDefaultAngleBins = 64;

/// Generates chirps on demand from a scene, so long scenes need no cube in
/// memory. Chirp contents depend only on (scene, config, seed, chirp index).
class SceneSynthesizer : public CubeSource {
 public:
  SceneSynthesizer(Scene scene, RadarConfig config, std::uint64_t seed, GroundTruthOptions options = {});

  const RadarConfig& config() const override { return config_; }
  std::size_t frames() const override { return frames_; }
  void read_chirp(std::size_t chirp, std::span<cplx> out) const override;

  const GroundTruth& truth() const { return truth_; }
  const Scene& scene() const { return scene_; }
  RadarCube materialize() const;

  /// Noise-free complex IF phasor of object `o` at slow-time sample `s`
  /// (vibrating term plus static interference, which ramps to S'_static
  /// around each speech segment).
  cplx object_phasor(std::size_t o, std::size_t s) const;

 private:
  void blend_static_shifts(double rate);

  Scene scene_;
  RadarConfig config_;
  std::uint64_t seed_;
  std::size_t frames_ = 0;
  GroundTruth truth_;
  std::vector<int> static_segment_;     // segment whose S'_static applies, -1 for none
  std::vector<double> static_weight_;   // blend from S_static (0) to S'_static (1)
  std::vector<double> carrier_phase_;
  std::vector<std::vector<cplx>> kernels_;  // per object, rx x fast-time
};

/// In-memory convenience wrapper around SceneSynthesizer.
struct SynthesisResult {
  RadarCube cube;
  GroundTruth truth;
};
SynthesisResult synthesize_radar_cube(const Scene& scene, const RadarConfig& config, std::uint64_t seed,
                                      const GroundTruthOptions& options = {});

/// Writes displacement/phase/mask tensors (flat binary) plus a small CSV summary.
void export_ground_truth(const GroundTruth& truth, const std::string& directory, bool include_csv_series);

}  // namespace mmvib::synth
