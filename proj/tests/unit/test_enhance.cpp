#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "mmvib/amplify/spectral_subtraction.hpp"
#include "mmvib/amplify/filters.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"
#include "mmvib/core/rng.hpp"
#include "mmvib/enhance/enhance.hpp"
#include "mmvib/synth/acoustics.hpp"
#include "mmvib/synth/layouts.hpp"
#include "mmvib/synth/speech.hpp"
#include "mmvib/synth/synthesizer.hpp"

using namespace mmvib;
using namespace mmvib::enhance;
using amplify::STFTMatrix;

namespace {

STFTMatrix blank(std::size_t frames, std::size_t bins) {
  STFTMatrix m;
  m.values = ComplexMatrix(frames, bins);
  m.params = {2 * (bins - 1), (bins - 1) / 2};
  m.frame_rate = 1000.0;
  m.signal_length = (frames - 1) * m.params.hop + m.params.window;
  return m;
}

RealMatrix filled(std::size_t r, std::size_t c, double v) { return RealMatrix(r, c, v); }

Eigen::MatrixXcd random_psd(Eigen::Index m, Rng& rng) {
  Eigen::MatrixXcd a(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = rng.complex_normal(1.0);
  return a * a.adjoint() + 0.1 * Eigen::MatrixXcd::Identity(m, m);
}

SpatialCovariances one_bin(const Eigen::MatrixXcd& phi) {
  SpatialCovariances c;
  c.bins = {phi};
  c.fallback = {false};
  return c;
}

double angle_deg(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const double c = std::abs(a.dot(b)) / (a.norm() * b.norm());
  return std::acos(std::min(1.0, c)) * 180.0 / kPi;
}

}  // namespace

TEST_CASE("median mask combination") {
  const auto a = filled(2, 3, 0.3);
  SUBCASE("identical masks are unchanged") {
    const std::vector<RealMatrix> same{a, a, a};
    CHECK(median_combine_masks(same).data == a.data);
  }
  SUBCASE("majority wins") {
    const std::vector<RealMatrix> votes{filled(1, 1, 0.0), filled(1, 1, 0.0), filled(1, 1, 1.0)};
    CHECK(median_combine_masks(votes)(0, 0) == 0.0);
  }
  SUBCASE("an all-ones outlier is rejected") {
    Rng rng(5);
    std::vector<RealMatrix> honest(3, RealMatrix(4, 6));
    for (auto& m : honest)
      for (auto& v : m.data) v = rng.uniform();
    const auto expected = median_combine_masks(honest);
    auto with_outlier = honest;
    with_outlier.push_back(filled(4, 6, 1.0));
    CHECK(median_combine_masks(with_outlier).data == expected.data);
  }
  SUBCASE("shape mismatch") {
    const std::vector<RealMatrix> bad{a, filled(3, 3, 0.0)};
    CHECK_THROWS_AS(median_combine_masks(bad), Error);
  }
}

TEST_CASE("spatial covariance reference cases") {
  Rng rng(2);
  auto y = blank(30, 5);
  for (auto& v : y.values.data) v = rng.complex_normal(1.0);
  RealMatrix mask(30, 5);
  for (auto& v : mask.data) v = rng.uniform();

  SUBCASE("one channel is the mask-weighted power") {
    const std::vector<STFTMatrix> one{y};
    const auto phi = spatial_covariance(one, mask);
    for (std::size_t k = 0; k < 5; ++k) {
      double num = 0.0, den = 0.0;
      for (std::size_t t = 0; t < 30; ++t) {
        num += mask(t, k) * std::norm(y.values(t, k));
        den += mask(t, k);
      }
      CHECK(phi.bins[k](0, 0).real() == doctest::Approx(num / den).epsilon(1e-12));
      CHECK(phi.bins[k](0, 0).imag() == 0.0);
    }
  }
  SUBCASE("two identical channels give a rank-one matrix") {
    const std::vector<STFTMatrix> two{y, y};
    const auto phi = spatial_covariance(two, filled(30, 5, 1.0));
    for (const auto& b : phi.bins) {
      CHECK(std::abs(b(0, 0) - b(1, 1)) < 1e-12);
      CHECK(std::abs(b(0, 1) - b(0, 0)) < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
      CHECK(std::abs(es.eigenvalues()(0)) < 1e-10 * es.eigenvalues()(1));
    }
  }
  SUBCASE("random channels give Hermitian PSD bins") {
    std::vector<STFTMatrix> many(4, y);
    for (auto& m : many)
      for (auto& v : m.values.data) v = rng.complex_normal(1.0);
    const auto phi = spatial_covariance(many, mask);
    for (const auto& b : phi.bins) {
      CHECK((b - b.adjoint()).norm() <= 1e-10);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }
  SUBCASE("a massless bin falls back") {
    RealMatrix empty = mask;
    for (std::size_t t = 0; t < 30; ++t) empty(t, 2) = 0.0;
    const std::vector<STFTMatrix> one{y};
    const auto phi = spatial_covariance(one, empty);
    CHECK(phi.fallback[2]);
    CHECK_FALSE(phi.fallback[1]);
  }
}

TEST_CASE("MVDR on a single channel is the identity") {
  Rng rng(3);
  auto y = blank(20, 4);
  for (auto& v : y.values.data) v = rng.complex_normal(1.0);
  const std::vector<STFTMatrix> one{y};
  const auto w = mvdr_weights(spatial_covariance(one, filled(20, 4, 1.0)), spatial_covariance(one, filled(20, 4, 0.5)));
  const auto out = apply_weights(one, w);
  for (std::size_t i = 0; i < y.values.data.size(); ++i) CHECK(std::abs(out.values.data[i] - y.values.data[i]) < 1e-12);
}

TEST_CASE("MVDR weights are distortionless in every bin") {
  Rng rng(4);
  SpatialCovariances speech, noise;
  for (int k = 0; k < 64; ++k) {
    speech.bins.push_back(random_psd(3, rng));
    noise.bins.push_back(random_psd(3, rng));
  }
  speech.fallback.assign(64, false);
  noise.fallback.assign(64, false);
  const auto w = mvdr_weights(speech, noise);
  for (std::size_t k = 0; k < 64; ++k) {
    CHECK(std::abs(w.weights[k].dot(w.steering[k]) - cplx(1.0)) <= 1e-8);
    CHECK(std::abs(w.steering[k](0) - cplx(1.0)) <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(speech.bins[k]);
    const Eigen::VectorXcd principal = es.eigenvectors().col(2);
    CHECK(angle_deg(principal, w.steering[k]) < 1e-6);
  }
}

TEST_CASE("MVDR beats every point of a grid on the constraint set") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXcd phi_n = random_psd(2, rng);
    Eigen::VectorXcd d(2);
    d << cplx(1.0), rng.complex_normal(1.0);
    const auto w = mvdr_weights(one_bin(d * d.adjoint()), one_bin(phi_n)).weights[0];
    const double got = std::real(w.dot(phi_n * w));

    // w = d / |d|^2 + z u with u orthogonal to d spans every w with w^H d = 1.
    Eigen::VectorXcd u(2);
    u << -std::conj(d(1)), std::conj(d(0));
    u.normalize();
    const Eigen::VectorXcd base = d / d.squaredNorm();
    const cplx z0 = u.dot(w);  // start the grid around the reported optimum
    double grid = std::numeric_limits<double>::infinity();
    const int steps = 200;
    const double half = 0.05;
    for (int i = -steps; i <= steps; ++i)
      for (int j = -steps; j <= steps; ++j) {
        const cplx z = z0 + cplx(half * i / steps, half * j / steps);
        const Eigen::VectorXcd v = base + z * u;
        grid = std::min(grid, std::real(v.dot(phi_n * v)));
      }
    CHECK(std::abs(w.dot(d) - cplx(1.0)) < 1e-8);
    CHECK(got <= grid + 1e-6);
  }
}

TEST_CASE("two channels with incoherent noise gain 3 dB") {
  const std::size_t frames = 4000, bins = 9;
  Rng rng(10);
  std::vector<STFTMatrix> y(2, blank(frames, bins));
  RealMatrix speech(frames, bins, 0.0), quiet(frames, bins, 0.0);
  std::vector<STFTMatrix> noise_only(2, blank(frames, bins));
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k) {
      const bool talking = t < frames / 2;
      const cplx s = talking ? rng.complex_normal(3.0) : cplx(0.0);
      for (std::size_t c = 0; c < 2; ++c) {
        const cplx n = rng.complex_normal(1.0);
        y[c].values(t, k) = s + n;
        noise_only[c].values(t, k) = n;
      }
      speech(t, k) = talking ? 1.0 : 0.0;
      quiet(t, k) = talking ? 0.0 : 1.0;
    }
  const auto w = mvdr_weights(spatial_covariance(y, speech), spatial_covariance(y, quiet));
  const auto out_noise = apply_weights(noise_only, w);
  double in = 0.0, out = 0.0;
  for (std::size_t i = 0; i < out_noise.values.data.size(); ++i) {
    in += std::norm(noise_only[0].values.data[i]);
    out += std::norm(out_noise.values.data[i]);
  }
  const double gain_db = 10.0 * std::log10(in / out);
  CHECK(gain_db == doctest::Approx(10.0 * std::log10(2.0)).epsilon(0.5 / 3.0103));
}

TEST_CASE("enhancement is linear in the input") {
  Rng rng(12);
  MaskedSTFT in;
  for (int c = 0; c < 3; ++c) {
    auto m = blank(60, 17);
    for (auto& v : m.values.data) v = rng.complex_normal(1.0);
    in.stfts.push_back(m);
    RealMatrix s(60, 17);
    for (auto& v : s.data) v = rng.uniform();
    RealMatrix n = s;
    for (auto& v : n.data) v = 1.0 - v;
    in.speech_masks.push_back(s);
    in.noise_masks.push_back(n);
  }
  std::vector<int> groups(60, -1);
  for (std::size_t t = 10; t < 30; ++t) groups[t] = 0;
  for (std::size_t t = 35; t < 50; ++t) groups[t] = 1;
  const auto base = enhance::enhance(in, {}, groups);
  CHECK(base.groups == 2);
  CHECK(base.frame_beamformer[0] == 1);   // ungrouped frames
  CHECK(base.frame_beamformer[12] == 2);  // group 0
  CHECK(base.frame_beamformer[40] == 3);  // group 1

  const cplx c(-1.5, 0.7);
  MaskedSTFT scaled = in;
  for (auto& m : scaled.stfts)
    for (auto& v : m.values.data) v *= c;
  const auto out = enhance::enhance(scaled, {}, groups);
  for (std::size_t i = 0; i < out.spectrum.values.data.size(); ++i)
    CHECK(std::abs(out.spectrum.values.data[i] - c * base.spectrum.values.data[i]) <=
          1e-9 * (1.0 + std::abs(c * base.spectrum.values.data[i])));
}

TEST_CASE("mask estimation modes") {
  Rng rng(7);
  std::vector<STFTMatrix> y(2, blank(10, 5));
  for (auto& m : y)
    for (auto& v : m.values.data) v = rng.complex_normal(1.0);
  CHECK_THROWS_AS(estimate_masks(y, MaskMode::Oracle), Error);

  std::vector<RealMatrix> truth(2, RealMatrix(10, 5, 0.25));
  const auto oracle = estimate_masks(y, MaskMode::Oracle, &truth);
  CHECK(oracle.speech[1].data == truth[1].data);
  for (double v : oracle.noise[0].data) CHECK(v == 0.75);

  std::vector<amplify::NoiseProfile> noise(2);
  for (auto& n : noise) {
    n.magnitude.assign(5, 0.5);
    n.frames_used = 1;
  }
  noise[1].magnitude[3] = 0.0;
  const SpectralGateParams p{2.0, 0.1};
  const auto gate = estimate_masks(y, MaskMode::SpectralGate, nullptr, noise, p);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t k = 0; k < 5; ++k) {
      const double mag = std::abs(y[0].values(t, k));
      const double expected = 1.0 / (1.0 + std::exp(-(mag - 2.0 * 0.5) / (0.1 * 0.5)));
      CHECK(gate.speech[0](t, k) == doctest::Approx(expected).epsilon(1e-12));
      CHECK(gate.speech[0](t, k) + gate.noise[0](t, k) == doctest::Approx(1.0));
    }
  CHECK(gate.speech[1](0, 3) == 1.0);  // zero noise estimate: any energy is speech
}

TEST_CASE("oracle masks on noise-free and speech-free scenes") {
  synth::Scene s;
  s.duration = 0.8;
  s.objects.push_back(testing::foil(Vec3(1.0, 0.0, 0.0)));
  SUBCASE("noise-free speech") {
    s.speakers.push_back(testing::tone_speaker(Vec3(1.0, 0.3, 0.0), 300.0, 0.5, {{0.2, 0.6}}));
    const synth::SceneSynthesizer syn(s, testing::quiet_radar(), 1);
    const auto& t = syn.truth().objects[0];
    const auto& stft = t.clean_stft;
    const double rate = syn.truth().sample_rate;
    for (std::size_t f = 0; f < stft.frames(); ++f) {
      const double start = static_cast<double>(stft.frame_start(f)) / rate;
      const double end = static_cast<double>(stft.frame_start(f) + stft.params.window) / rate;
      if (start < 0.25 || end > 0.55) continue;  // well inside the utterance
      for (std::size_t k = 0; k < stft.bins(); ++k) CHECK(t.speech_mask(f, k) == 1.0);
    }
  }
  SUBCASE("speech-free") {
    const synth::SceneSynthesizer syn(s, testing::quiet_radar(), 1);
    const auto& m = syn.truth().objects[0].speech_mask;
    CHECK(std::all_of(m.data.begin(), m.data.end(), [](double v) { return v == 0.0; }));
  }
}

TEST_CASE("speech covariance steering follows the acoustic transfer") {
  // One talker, three foils. The vibration phase at foil o is the source
  // filtered by membrane_gain / r and delayed by r / c, so relative to foil 0
  // the transfer at angular frequency w is g_o(w) r_0 / (g_0(w) r_o) e^{-j w (r_o - r_0) / c}.
  synth::RadarConfig radar;
  const double rate = radar.slow_time_rate();
  synth::Scene scene;
  scene.duration = 2.0;
  synth::Speaker spk;
  spk.label = "P1";
  spk.position = synth::seat_position(1, 1.1);
  spk.waveform.sample_rate = rate;
  spk.waveform.samples.assign(static_cast<std::size_t>(scene.duration * rate), 0.0);
  Rng rng(3);
  const auto u = synth::synthesize_utterance(synth::default_voice(0), 4, 1.2, rate, rng);
  std::copy(u.begin(), u.end(), spk.waveform.samples.begin() + static_cast<long>(0.4 * rate));
  spk.active_intervals = {{0.4, 1.6}};
  scene.speakers.push_back(spk);
  for (int o = 0; o < 3; ++o) {
    auto obj = testing::foil(Vec3(1.1 + 0.1 * o, -0.3 + 0.3 * o, 0.0), "o" + std::to_string(o));
    obj.natural_frequency = kTwoPi * (150.0 + 50.0 * o);
    scene.objects.push_back(obj);
  }
  const synth::SceneSynthesizer syn(scene, radar, 2);
  const auto& truth = syn.truth();

  // Noisy observations of the clean per-object spectra.
  double power = 0.0;
  for (const auto& v : truth.objects[0].clean_stft.values.data) power += std::norm(v);
  power /= static_cast<double>(truth.objects[0].clean_stft.values.data.size());
  std::vector<STFTMatrix> y;
  std::vector<RealMatrix> masks;
  for (const auto& o : truth.objects) {
    STFTMatrix m = o.clean_stft;
    for (auto& v : m.values.data) v += rng.complex_normal(0.05 * std::sqrt(power));
    y.push_back(m);
    masks.push_back(o.speech_mask);
  }
  const auto mask = median_combine_masks(masks);
  const auto phi = spatial_covariance(y, mask);

  // Expected speech covariance of bin k: every source frequency f adds
  // |S(f)|^2 |B(f)|^2 |W(f - f_k)|^2 h(f) h(f)^H, with S the source spectrum,
  // B the voice-band filter (applied forward and backward) and W the Hann
  // window's transform. Its principal eigenvector is the reference steering.
  const auto& ref = truth.objects[0].clean_stft;
  const auto source = fft::rfft(spk.waveform.samples);
  const double df = rate / static_cast<double>(spk.waveform.samples.size());
  const double bin_width = rate / static_cast<double>(ref.params.window);
  const auto band = amplify::butterworth_bandpass(truth.options.band_lo, truth.options.band_hi, rate);
  auto hann_leak = [](double offset_bins) {
    const double x = std::abs(offset_bins);
    if (x < 1e-9) return 1.0;
    if (std::abs(x - 1.0) < 1e-9) return 0.25;
    return std::abs(std::sin(kPi * x) / (kPi * x) / (1.0 - x * x));
  };
  auto transfer = [&](double hz) {
    const double w = kTwoPi * hz;
    Eigen::VectorXcd h(3);
    for (int o = 0; o < 3; ++o) {
      const double r = (scene.objects[o].position - spk.position).norm();
      h(o) = synth::membrane_gain(scene.objects[o], w) / r * std::polar(1.0, -w * r / kSpeedOfSound);
    }
    return h;
  };

  std::vector<std::pair<double, std::size_t>> energy;
  for (std::size_t k = 1; k < ref.bins(); ++k) {
    double e = 0.0;
    for (std::size_t t = 0; t < ref.frames(); ++t) e += std::norm(ref.values(t, k));
    energy.emplace_back(e, k);
  }
  std::sort(energy.rbegin(), energy.rend());
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t k = energy[i].second;
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(3, 3);
    for (std::size_t j = 1; j < source.size(); ++j) {
      const double hz = static_cast<double>(j) * df;
      const double leak = hann_leak((hz - ref.bin_hz(k)) / bin_width);
      if (leak < 1e-4) continue;
      const double weight = std::norm(source[j]) * std::pow(std::norm(band.response(hz)), 2) * leak * leak;
      const auto h = transfer(hz);
      expected += weight * h * h.adjoint();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> truth_es(expected), es(phi.bins[k]);
    CHECK(angle_deg(es.eigenvectors().col(2), truth_es.eigenvectors().col(2)) < 5.0);
  }
}
