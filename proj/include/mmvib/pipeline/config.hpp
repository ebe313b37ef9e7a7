#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmvib/amplify/stft.hpp"
#include "mmvib/enhance/enhance.hpp"
#include "mmvib/synth/layouts.hpp"
#include "mmvib/synth/scene.hpp"

namespace mmvib::pipeline {

struct SceneConfig {
  synth::LayoutSpec layout;
  double static_shift_gain = 0.1;
  double static_interference_ratio = 0.8;
  double phase_drift = 1.0;  // rad/s
};

struct PipelineParams {
  std::size_t targets = 3;          // M
  double gamma = 0.1;
  double alpha = 2.0;               // over-subtraction
  double beta = 0.01;               // spectral floor
  std::size_t speakers = 0;         // N; 0 selects it by CH index
  std::size_t envelope_dim = 64;    // D
  std::size_t max_speakers = 5;     // N_max
  double band_lo = 50.0;            // Hz
  double band_hi = 1000.0;          // Hz
  amplify::StftParams stft;
  enhance::MaskMode mask_mode = enhance::MaskMode::Oracle;
  std::size_t noise_frames = 20;
  std::size_t map_chirp_stride = 32;
  bool per_speaker_steering = true;  // one speech covariance per speaker cluster
};

struct SweepAxes {
  std::vector<double> distance;           // m
  std::vector<std::size_t> speakers;
  std::vector<std::size_t> objects;
  std::vector<synth::Arrangement> arrangement;

  bool empty() const { return distance.empty() && speakers.empty() && objects.empty() && arrangement.empty(); }
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  SceneConfig scene;
  synth::RadarConfig radar;
  PipelineParams pipeline;
  SweepAxes sweep;

  /// Throws a parameter error naming the offending field.
  void validate() const;
  /// Short hex digest of everything except the output directory.
  std::string fingerprint() const;
};

/// JSON with unit-suffixed keys ("distance_m", "band_lo_hz", ...). Unknown keys
/// are rejected so a misspelled unit cannot be silently ignored. A top-level
/// "scene_path" loads the scene section from another file, relative to this one.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
std::string to_json(const ExperimentConfig& config);

/// Root for relative output directories: $MMVIB_OUT when set, else the cwd.
std::filesystem::path output_root();

}  // namespace mmvib::pipeline
