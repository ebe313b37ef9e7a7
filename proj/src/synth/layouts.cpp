#include "mmvib/synth/layouts.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mmvib/core/error.hpp"
#include "mmvib/core/rng.hpp"
#include "mmvib/synth/speech.hpp"

namespace mmvib::synth {
namespace {

constexpr double kReferenceDistance = 1.1;  // central object range the seat table is laid out for
constexpr double kSeatHeight = 0.3;
constexpr std::array<std::array<double, 2>, 5> kSeats = {{{1.5, 0.55}, {1.5, 0.2}, {1.5, -0.15}, {1.5, -0.5}, {2.0, 0.0}}};

struct ObjectSlot {
  const char* name;
  double range;
  double azimuth_deg;
  double resonance_hz;
};
constexpr std::array<ObjectSlot, 4> kObjects = {{
    {"O1", 1.1, 0.0, 180.0},
    {"O2", 1.3, 30.0, 160.0},
    {"O3", 1.0, -30.0, 240.0},
    {"O4", 1.2, 12.0, 200.0},
}};

double deg(double d) { return d * kPi / 180.0; }

}  // namespace

Arrangement parse_arrangement(const std::string& name) {
  if (name == "natural") return Arrangement::Natural;
  if (name == "shoulder" || name == "shoulder-to-shoulder") return Arrangement::ShoulderToShoulder;
  fail(ErrorKind::Configuration, "unknown arrangement '" + name + "' (expected natural or shoulder)");
}

std::string to_string(Arrangement a) { return a == Arrangement::Natural ? "natural" : "shoulder"; }

std::vector<std::size_t> seats_for(Arrangement arrangement, std::size_t speakers) {
  require(speakers >= 1 && speakers <= 5, ErrorKind::Configuration, "layouts support 1..5 speakers");
  if (speakers == 5) return {0, 1, 2, 3, 4};
  if (arrangement == Arrangement::Natural) {
    static const std::array<std::vector<std::size_t>, 4> natural = {{{0}, {0, 4}, {0, 2, 4}, {0, 2, 3, 4}}};
    return natural[speakers - 1];
  }
  static const std::array<std::vector<std::size_t>, 4> shoulder = {{{3}, {3, 4}, {2, 3, 4}, {0, 1, 2, 3}}};
  return shoulder[speakers - 1];
}

Vec3 seat_position(std::size_t seat, double distance) {
  require(seat < kSeats.size(), ErrorKind::Configuration, "seat index out of range");
  return {kSeats[seat][0] + distance - kReferenceDistance, kSeats[seat][1], kSeatHeight};
}

Scene build_layout_scene(const LayoutSpec& spec, double sample_rate, std::uint64_t seed) {
  require(spec.objects >= 1 && spec.objects <= kObjects.size(), ErrorKind::Configuration, "layouts support 1..4 objects");
  require(spec.utterances_per_speaker >= 1, ErrorKind::Configuration, "need at least one utterance per speaker");
  require(spec.distance > 0.0 && sample_rate > 0.0, ErrorKind::Configuration, "distance and sample rate must be positive");
  require(spec.min_utterance > 0.0 && spec.max_utterance >= spec.min_utterance && spec.min_gap >= 0.0 &&
              spec.max_gap >= spec.min_gap,
          ErrorKind::Configuration, "invalid utterance or gap range");

  Scene scene;
  const double shift = spec.distance - kReferenceDistance;
  for (std::size_t i = 0; i < spec.objects; ++i) {
    MembraneObject o;
    o.name = kObjects[i].name;
    const double az = deg(kObjects[i].azimuth_deg);
    o.position = Vec3(kObjects[i].range * std::cos(az) + shift, kObjects[i].range * std::sin(az), 0.0);
    o.natural_frequency = kTwoPi * kObjects[i].resonance_hz;
    scene.objects.push_back(o);
  }
  if (spec.include_wall) {
    MembraneObject wall;
    wall.name = "wall";
    wall.position = Vec3(4.3 * std::cos(deg(10.0)), 4.3 * std::sin(deg(10.0)), 0.0);
    wall.static_reflectivity = 20.0;
    wall.static_interference_ratio = 0.0;
    wall.static_shift_gain = 0.0;
    wall.rigid = true;
    scene.objects.push_back(wall);
  }

  const auto seats = seats_for(spec.arrangement, spec.speakers);
  Rng order_rng(derive_seed(seed, "layout-order"));
  std::vector<std::size_t> turns;
  for (std::size_t s = 0; s < spec.speakers; ++s) turns.insert(turns.end(), spec.utterances_per_speaker, s);
  std::shuffle(turns.begin(), turns.end(), order_rng.engine());

  struct Turn {
    double start, duration;
    int digit;
  };
  std::vector<std::vector<Turn>> per_speaker(spec.speakers);
  double t = spec.leading_silence;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const double dur = order_rng.uniform(spec.min_utterance, spec.max_utterance);
    const int digit = static_cast<int>(order_rng.index(10));
    per_speaker[turns[i]].push_back({t, dur, digit});
    t += dur;
    if (i + 1 < turns.size()) t += order_rng.uniform(spec.min_gap, spec.max_gap);
  }
  scene.duration = t + spec.trailing_silence;

  const auto total = static_cast<std::size_t>(std::ceil(scene.duration * sample_rate));
  for (std::size_t s = 0; s < spec.speakers; ++s) {
    Speaker spk;
    spk.label = "S" + std::to_string(s + 1);
    spk.position = seat_position(seats[s], spec.distance);
    spk.waveform.sample_rate = sample_rate;
    spk.waveform.duration = scene.duration;
    spk.waveform.samples.assign(total, 0.0);
    const VoiceProfile voice = default_voice(s);
    Rng voice_rng(derive_seed(seed, "voice", s));
    for (const auto& turn : per_speaker[s]) {
      const auto begin = static_cast<std::size_t>(std::ceil(turn.start * sample_rate));
      const auto utter = synthesize_utterance(voice, turn.digit, turn.duration, sample_rate, voice_rng);
      for (std::size_t i = 0; i < utter.size() && begin + i < total; ++i) spk.waveform.samples[begin + i] = utter[i];
      spk.active_intervals.push_back({turn.start, turn.start + turn.duration});
      spk.digits.push_back(turn.digit);
    }
    scene.speakers.push_back(std::move(spk));
  }
  return scene;
}

}  // namespace mmvib::synth
