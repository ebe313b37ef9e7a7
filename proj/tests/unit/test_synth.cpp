#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"
#include "mmvib/core/stats.hpp"
#include "mmvib/radarcube/radarcube.hpp"
#include "mmvib/synth/acoustics.hpp"
#include "mmvib/synth/layouts.hpp"
#include "mmvib/synth/speech.hpp"
#include "mmvib/synth/synthesizer.hpp"
#include "mmvib/vibext/vibext.hpp"

using namespace mmvib;
using namespace mmvib::synth;
using mmvib::testing::foil;
using mmvib::testing::quiet_radar;
using mmvib::testing::tone_speaker;

namespace {

// Single foil at 1.125 m boresight, one 200 Hz talker 30 cm to its side.
Scene single_object_scene(double duration) {
  Scene s;
  s.duration = duration;
  s.speakers.push_back(tone_speaker(Vec3(1.125, 0.3, 0.0), 200.0, 0.5, {{0.0, duration}}));
  auto o = foil(Vec3(1.125, 0.0, 0.0));
  o.static_interference_ratio = 0.0;
  s.objects.push_back(o);
  s.hardware.phase_drift = 0.0;
  return s;
}

}  // namespace

TEST_CASE("sound pressure follows 1/r with propagation delay") {
  Speaker s = tone_speaker(Vec3::Zero(), 100.0, 1.0, {{0.0, 10.0}});
  CHECK(sound_pressure(s, Vec3(1, 0, 0), 1.0 / kSpeedOfSound) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sound_pressure(s, Vec3(2, 0, 0), 2.0 / kSpeedOfSound) == doctest::Approx(0.5).epsilon(1e-12));
  double peak = 0.0;
  for (int i = 0; i < 2000; ++i) peak = std::max(peak, std::abs(sound_pressure(s, Vec3(2, 0, 0), 0.1 + i * 1e-5)));
  CHECK(peak == doctest::Approx(0.5).epsilon(1e-4));

  Speaker quiet = tone_speaker(Vec3::Zero(), 100.0, 1.0, {{1.0, 2.0}});
  CHECK(sound_pressure(quiet, Vec3(1, 0, 0), 0.5) == 0.0);
  CHECK_THROWS_AS(sound_pressure(s, Vec3::Zero(), 0.0), Error);
}

TEST_CASE("membrane response at and far above resonance") {
  MembraneObject o = foil(Vec3::Zero());
  const double w0 = o.natural_frequency;
  const double p = 2.0;
  std::vector<SinusoidComponent> at_res{{p, w0, 0.0}};
  CHECK(membrane_displacement(o, at_res, 0.0) == doctest::Approx(p * o.surface_area / (w0 * o.damping)).epsilon(1e-12));

  const double w = 40.0 * w0;
  const double high = membrane_gain(o, w) * p;
  CHECK(high == doctest::Approx(p * o.surface_area / (o.mass_per_length * w * w)).epsilon(0.02));
  CHECK(membrane_gain(o, 2.0 * w) < membrane_gain(o, w));

  std::vector<SinusoidComponent> silent{{0.0, w0, 0.0}};
  for (double t : {0.0, 0.01, 0.3}) CHECK(membrane_displacement(o, silent, t) == 0.0);
}

TEST_CASE("decompose reconstructs the sampled waveform") {
  const double rate = 1000.0;
  RealSeries x(200);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double t = static_cast<double>(n) / rate;
    x[n] = 0.3 * std::cos(kTwoPi * 50.0 * t + 1.0) + 0.1 * std::sin(kTwoPi * 120.0 * t);
  }
  const auto comps = decompose(x, rate);
  for (const auto& c : comps) {
    CHECK(c.amplitude >= 0.0);
    CHECK(c.angular_frequency > 0.0);
    CHECK(c.phase >= 0.0);
    CHECK(c.phase < kTwoPi);
  }
  for (std::size_t n = 0; n < x.size(); n += 7) {
    const double t = static_cast<double>(n) / rate;
    double y = 0.0;
    for (const auto& c : comps) y += c.amplitude * std::cos(c.angular_frequency * t + c.phase);
    CHECK(y == doctest::Approx(x[n]).epsilon(1e-9));
  }
}

TEST_CASE("scene validation rejects broken inputs") {
  Scene s = single_object_scene(0.2);
  s.speakers[0].active_intervals = {{0.1, 0.2}, {0.0, 0.05}};
  CHECK_THROWS_AS(s.validate(), Error);
  s = single_object_scene(0.2);
  s.objects[0].damping = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = single_object_scene(0.2);
  s.speakers[0].waveform.components[0].phase = kTwoPi;
  CHECK_THROWS_AS(s.validate(), Error);

  s = single_object_scene(0.2);
  s.objects[0].position = Vec3(9.0, 0.0, 0.0);  // beyond 128 * 3.75 cm
  CHECK_THROWS_AS(SceneSynthesizer(s, quiet_radar(), 1), Error);
}

TEST_CASE("radar config derived quantities") {
  RadarConfig c;
  CHECK(c.range_resolution() == doctest::Approx(0.0375));
  CHECK(c.slow_time_rate() == doctest::Approx(128.0 / 10.64e-3));
  CHECK(c.bandwidth == doctest::Approx(c.chirp_slope * c.chirp_duration()));
}

TEST_CASE("static object peaks at the analytic range bin") {
  Scene s = single_object_scene(0.05);
  s.speakers.clear();
  const auto cfg = quiet_radar();
  SceneSynthesizer syn(s, cfg, 5);
  std::vector<cplx> chirp(syn.chirp_size()), spec(syn.chirp_size());
  syn.read_chirp(17, chirp);
  radarcube::range_fft_chirp(chirp, cfg.rx_antennas, cfg.samples_per_chirp, spec);
  std::size_t best = 0;
  for (std::size_t k = 0; k < cfg.samples_per_chirp; ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  const double beat_hz = 2.0 * cfg.chirp_slope * 1.125 / cfg.c;
  const double bin_hz = cfg.fast_time_rate() / static_cast<double>(cfg.samples_per_chirp);
  CHECK(best == static_cast<std::size_t>(std::llround(beat_hz / bin_hz)));
  CHECK(best == 30);
}

TEST_CASE("noise-free phase at the object's cell is the vibration phase") {
  const auto cfg = quiet_radar();
  SceneSynthesizer syn(single_object_scene(0.3), cfg, 9);
  const auto& t = syn.truth().objects[0];
  std::vector<radarcube::Cell> cells{{t.range_bin, t.angle_bin, 0.0}};
  const auto iq = radarcube::extract_cell_series(syn, cells)[0];
  const auto phase = stats::unwrap(stats::angles(iq));
  const double off = phase[0] - t.vibration_phase[0];
  double err = 0.0, peak = 0.0;
  for (std::size_t s = 0; s < phase.size(); ++s) {
    err = std::max(err, std::abs(phase[s] - off - t.vibration_phase[s]));
    peak = std::max(peak, std::abs(t.vibration_phase[s]));
  }
  REQUIRE(peak > 1e-3);
  CHECK(err / peak < 1e-6);
}

TEST_CASE("synthesis is deterministic per seed") {
  Scene s = single_object_scene(0.05);
  auto cfg = quiet_radar();
  cfg.self_noise_std = 0.02;
  SceneSynthesizer a(s, cfg, 11), b(s, cfg, 11), c(s, cfg, 12);
  std::vector<cplx> x(a.chirp_size()), y(a.chirp_size()), z(a.chirp_size());
  for (std::size_t chirp : {0u, 100u, 511u}) {
    a.read_chirp(chirp, x);
    b.read_chirp(chirp, y);
    c.read_chirp(chirp, z);
    CHECK(x == y);
    CHECK(x != z);
  }
}

TEST_CASE("path loss and closer-object dominance") {
  Scene s = single_object_scene(0.1);
  s.objects.push_back(foil(Vec3(2.25, 0.0, 0.0), "far"));
  s.speakers[0].position = Vec3(0.9, 0.2, 0.0);
  SceneSynthesizer syn(s, quiet_radar(), 3);
  const auto& near = syn.truth().objects[0];
  const auto& far = syn.truth().objects[1];
  CHECK(far.amplitude / near.amplitude == doctest::Approx(std::pow(2.0, -2.0)).epsilon(1e-12));
  CHECK(stats::rms(near.displacement) > stats::rms(far.displacement));
}

TEST_CASE("ground-truth masks are complementary ratios") {
  Scene s = single_object_scene(0.4);
  s.speakers[0].active_intervals = {{0.1, 0.25}};
  auto cfg = quiet_radar();
  cfg.self_noise_std = 0.02;
  SceneSynthesizer syn(s, cfg, 4);
  const auto& t = syn.truth().objects[0];
  REQUIRE(t.speech_mask.rows > 0);
  double worst = 0.0;
  bool bounded = true;
  for (std::size_t i = 0; i < t.speech_mask.data.size(); ++i) {
    const double m = t.speech_mask.data[i];
    bounded = bounded && m >= 0.0 && m <= 1.0;
    worst = std::max(worst, std::abs(m + t.noise_mask.data[i] - 1.0));
  }
  CHECK(bounded);
  CHECK(worst < 1e-12);
}

TEST_CASE("speech-period center shift equals the static perturbation") {
  Scene s = single_object_scene(1.2);
  s.speakers[0].active_intervals = {{0.5, 0.9}};
  s.objects[0].static_interference_ratio = 0.8;
  s.objects[0].static_shift_gain = 0.3;
  s.hardware.phase_drift = 3.0;
  SceneSynthesizer syn(s, quiet_radar(), 21);
  const auto& t = syn.truth().objects[0];
  const double rate = syn.truth().sample_rate;
  std::vector<cplx> silence, speech;
  for (std::size_t i = 0; i < syn.truth().samples; ++i) {
    const double time = static_cast<double>(i) / rate;
    if (time < 0.35) silence.push_back(syn.object_phasor(0, i));
    if (time > 0.6 && time < 0.8) speech.push_back(syn.object_phasor(0, i));
  }
  const auto c0 = vibext::kasa_fit(silence).center;
  const auto cs = vibext::kasa_fit(speech).center;
  REQUIRE(t.static_speech.size() == 1);
  // The vibration wiggle on the speech arc leaves a small bias on the center.
  CHECK(std::abs(std::abs(cs - c0) - std::abs(t.static_speech[0] - t.static_silence)) < 0.02 * t.amplitude);
  CHECK(std::abs(c0 - t.static_silence) < 1e-9 * t.amplitude);
}

TEST_CASE("layout scenes satisfy the scene invariants") {
  LayoutSpec spec;
  spec.speakers = 4;
  spec.utterances_per_speaker = 2;
  const double rate = RadarConfig{}.slow_time_rate();
  const Scene a = build_layout_scene(spec, rate, 8);
  const Scene b = build_layout_scene(spec, rate, 8);
  a.validate();
  CHECK(a.speakers.size() == 4);
  CHECK(a.duration == b.duration);
  std::vector<TimeInterval> all;
  for (const auto& spk : a.speakers) {
    CHECK(spk.active_intervals.size() == 2);
    all.insert(all.end(), spk.active_intervals.begin(), spk.active_intervals.end());
  }
  std::sort(all.begin(), all.end(), [](auto& x, auto& y) { return x.start < y.start; });
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i].start >= all[i - 1].end);
  CHECK(all.front().start >= spec.leading_silence - 1e-9);
  CHECK(all.back().end <= a.duration);

  CHECK(seats_for(Arrangement::Natural, 3).size() == 3);
  CHECK(parse_arrangement(to_string(Arrangement::ShoulderToShoulder)) == Arrangement::ShoulderToShoulder);
  CHECK_THROWS_AS(parse_arrangement("circle"), Error);
  spec.speakers = 6;
  CHECK_THROWS_AS(build_layout_scene(spec, rate, 1), Error);
}

TEST_CASE("utterances are reproducible and voiced") {
  Rng r1(5), r2(5);
  const double rate = 12000.0;
  const auto a = synthesize_utterance(default_voice(0), 3, 0.4, rate, r1);
  const auto b = synthesize_utterance(default_voice(0), 3, 0.4, rate, r2);
  CHECK(a == b);
  CHECK(a.size() == static_cast<std::size_t>(std::llround(0.4 * rate)));
  CHECK(stats::rms(a) > 0.0);
  CHECK_THROWS_AS(synthesize_utterance(default_voice(0), 10, 0.4, rate, r1), Error);
}
