#pragma once

#include <cstdint>

#include "mmvib/core/rng.hpp"
#include "mmvib/synth/scene.hpp"

// Procedural voiced-speech generator: a glottal harmonic series shaped by a
// digit-specific formant trajectory. Stands in for recorded digit utterances.
namespace mmvib::synth {

struct VoiceProfile {
  double f0 = 120.0;             // Hz
  double formant_scale = 1.0;    // vocal-tract length factor
  double tilt_db_per_octave = -9.0;
  double rms_pressure_at_1m = 0.5;  // Pa
};

/// Default voices used by the generated layouts, distinct per speaker index.
VoiceProfile default_voice(std::size_t speaker_index);

/// One utterance of `digit` (0..9), `duration` seconds long, sampled at `rate`.
RealSeries synthesize_utterance(const VoiceProfile& voice, int digit, double duration, double rate, Rng& rng);

}  // namespace mmvib::synth
