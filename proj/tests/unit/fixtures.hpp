#pragma once

// Small hand-built scenes shared by the unit tests. Everything here is short
// enough (well under a second of slow time) to synthesize in milliseconds.

#include <filesystem>
#include <string>
#include <vector>

#include "mmvib/synth/scene.hpp"

namespace mmvib::testing {

/// Speaker at `position` voicing one sinusoid during `intervals`.
inline synth::Speaker tone_speaker(const Vec3& position, double hz, double pa,
                                   std::vector<TimeInterval> intervals, std::string label = "spk") {
  synth::Speaker s;
  s.label = std::move(label);
  s.position = position;
  s.waveform.components = {{pa, kTwoPi * hz, 0.0}};
  s.active_intervals = std::move(intervals);
  return s;
}

inline synth::MembraneObject foil(const Vec3& position, std::string name = "foil") {
  synth::MembraneObject o;
  o.name = std::move(name);
  o.position = position;
  return o;
}

/// Radar with no self-noise; drift and static clutter are left to the scene.
inline synth::RadarConfig quiet_radar() {
  synth::RadarConfig c;
  c.self_noise_std = 0.0;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mmvib_unit" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mmvib::testing
