#pragma once

#include <cstdint>
#include <string>

#include "mmvib/synth/scene.hpp"

// Desk-scale room layouts: three (up to four) foil sheets on a table in front
// of the radar, speaker seats P1..P5 around it, and a back wall.
namespace mmvib::synth {

enum class Arrangement { Natural, ShoulderToShoulder };

Arrangement parse_arrangement(const std::string& name);
std::string to_string(Arrangement a);

struct LayoutSpec {
  Arrangement arrangement = Arrangement::Natural;
  std::size_t speakers = 3;             // 1..5
  std::size_t objects = 3;              // 1..4
  std::size_t utterances_per_speaker = 20;
  double distance = 1.1;                // m, radar to the central object
  bool include_wall = true;
  double leading_silence = 1.0;         // s
  double trailing_silence = 0.5;        // s
  double min_utterance = 0.35, max_utterance = 0.55;  // s
  double min_gap = 0.40, max_gap = 0.60;              // s
};

/// Seat positions P1..P5 for the given arrangement and speaker count.
std::vector<std::size_t> seats_for(Arrangement arrangement, std::size_t speakers);
Vec3 seat_position(std::size_t seat, double distance);

/// Builds a conversation scene: turn order, utterance timing and digits are
/// drawn from `seed`; waveforms are sampled at `sample_rate`.
Scene build_layout_scene(const LayoutSpec& spec, double sample_rate, std::uint64_t seed);

}  // namespace mmvib::synth
