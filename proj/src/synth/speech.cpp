#include "mmvib/synth/speech.hpp"

#include <array>
#include <cmath>

#include "mmvib/core/error.hpp"
#include "mmvib/core/stats.hpp"

namespace mmvib::synth {
namespace {

struct FormantPhase {
  double f1, f2;
};

// Coarse F1/F2 trajectory (onset, nucleus, offset) per spoken digit.
constexpr std::array<std::array<FormantPhase, 3>, 10> kDigitFormants = {{
    {{{400, 2000}, {500, 1500}, {450, 900}}},   // zero
    {{{300, 800}, {600, 1200}, {300, 1600}}},   // one
    {{{350, 1800}, {320, 900}, {300, 850}}},    // two
    {{{300, 1800}, {300, 1400}, {280, 2300}}},  // three
    {{{400, 900}, {500, 900}, {480, 1300}}},    // four
    {{{700, 1200}, {650, 1700}, {400, 2100}}},  // five
    {{{400, 2000}, {600, 1800}, {400, 1900}}},  // six
    {{{400, 1900}, {550, 1700}, {450, 1600}}},  // seven
    {{{500, 1900}, {450, 2100}, {350, 2200}}},  // eight
    {{{300, 1600}, {700, 1300}, {350, 2000}}},  // nine
}};

constexpr double kThirdFormant = 2500.0;

// Magnitude of a two-pole resonance at `fc` with bandwidth `bw`, unit gain at DC.
double resonance(double f, double fc, double bw) {
  const double a = fc * fc - f * f;
  const double b = f * bw;
  return (fc * fc + 0.25 * bw * bw) / std::sqrt(a * a + b * b);
}

}  // namespace

VoiceProfile default_voice(std::size_t speaker_index) {
  static constexpr std::array<double, 5> kF0 = {110.0, 205.0, 145.0, 250.0, 125.0};
  static constexpr std::array<double, 5> kScale = {1.0, 1.15, 0.92, 1.2, 1.05};
  VoiceProfile v;
  v.f0 = kF0[speaker_index % kF0.size()];
  v.formant_scale = kScale[speaker_index % kScale.size()];
  return v;
}

RealSeries synthesize_utterance(const VoiceProfile& voice, int digit, double duration, double rate, Rng& rng) {
  require(digit >= 0 && digit <= 9, ErrorKind::Parameter, "digit must be in 0..9");
  require(duration > 0.0 && rate > 0.0 && voice.f0 > 0.0, ErrorKind::Parameter, "invalid utterance parameters");
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  RealSeries out(n, 0.0);
  if (n == 0) return out;

  const auto& track = kDigitFormants[static_cast<std::size_t>(digit)];
  const double f0_offset = 1.0 + rng.uniform(-0.03, 0.03);
  const double vibrato_hz = rng.uniform(4.0, 6.0);
  const double vibrato_phase = rng.uniform(0.0, kTwoPi);
  const std::size_t harmonics = static_cast<std::size_t>(std::floor(0.45 * rate / voice.f0));
  std::vector<double> phase(harmonics, 0.0);
  for (auto& p : phase) p = rng.uniform(0.0, kTwoPi);

  const double ramp = std::min(0.03, 0.25 * duration);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double u = t / duration;
    // Two linear legs through the three formant targets.
    const double leg = std::min(u * 2.0, 2.0);
    const std::size_t k = leg < 1.0 ? 0 : 1;
    const double frac = leg - static_cast<double>(k);
    const double f1 = voice.formant_scale * (track[k].f1 + frac * (track[k + 1].f1 - track[k].f1));
    const double f2 = voice.formant_scale * (track[k].f2 + frac * (track[k + 1].f2 - track[k].f2));
    const double f3 = voice.formant_scale * kThirdFormant;
    const double f0 = voice.f0 * f0_offset * (1.04 - 0.08 * u) * (1.0 + 0.01 * std::sin(kTwoPi * vibrato_hz * t + vibrato_phase));

    double s = 0.0;
    for (std::size_t h = 0; h < harmonics; ++h) {
      const double fh = f0 * static_cast<double>(h + 1);
      phase[h] += kTwoPi * fh / rate;
      if (fh >= 0.45 * rate) continue;
      const double tilt = std::pow(10.0, voice.tilt_db_per_octave * std::log2(static_cast<double>(h + 1)) / 20.0);
      const double shape = resonance(fh, f1, 80.0) * resonance(fh, f2, 120.0) * resonance(fh, f3, 200.0);
      s += tilt * shape * std::cos(phase[h]);
    }
    double env = 1.0;
    if (t < ramp) env = 0.5 - 0.5 * std::cos(kPi * t / ramp);
    else if (duration - t < ramp) env = 0.5 - 0.5 * std::cos(kPi * (duration - t) / ramp);
    out[i] = s * env;
  }

  const double level = stats::rms(out);
  if (level > 0.0)
    for (auto& x : out) x *= voice.rms_pressure_at_1m / level;
  return out;
}

}  // namespace mmvib::synth
