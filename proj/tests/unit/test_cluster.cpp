#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "mmvib/amplify/spectral_subtraction.hpp"
#include "mmvib/cluster/cluster.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/rng.hpp"
#include "mmvib/metrics/metrics.hpp"
#include "mmvib/synth/layouts.hpp"
#include "mmvib/synth/speech.hpp"
#include "mmvib/synth/synthesizer.hpp"

using namespace mmvib;
using namespace mmvib::cluster;

namespace {

FeatureMatrix blobs(const std::vector<std::vector<double>>& centers, std::size_t per, double sigma, std::uint64_t seed,
                    std::vector<int>* truth = nullptr) {
  Rng rng(seed);
  FeatureMatrix f;
  for (std::size_t i = 0; i < per; ++i)
    for (std::size_t c = 0; c < centers.size(); ++c) {
      std::vector<double> row(centers[c]);
      for (auto& v : row) v += rng.normal(0.0, sigma);
      f.append(row);
      if (truth) truth->push_back(static_cast<int>(c));
    }
  return f;
}

// Calinski-Harabasz straight from its definition, for cross-checking.
double ch_oracle(const FeatureMatrix& f, std::span<const int> labels) {
  const std::size_t d = f.cols;
  std::vector<double> grand(d, 0.0);
  for (std::size_t i = 0; i < f.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) grand[j] += f.row(i)[j] / static_cast<double>(f.rows);
  const int k_max = *std::max_element(labels.begin(), labels.end());
  double between = 0.0, within = 0.0;
  std::size_t populated = 0;
  for (int k = 0; k <= k_max; ++k) {
    std::vector<double> mean(d, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < f.rows; ++i)
      if (labels[i] == k) {
        ++n;
        for (std::size_t j = 0; j < d; ++j) mean[j] += f.row(i)[j];
      }
    if (n == 0) continue;
    ++populated;
    for (auto& v : mean) v /= static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) between += static_cast<double>(n) * (mean[j] - grand[j]) * (mean[j] - grand[j]);
    for (std::size_t i = 0; i < f.rows; ++i)
      if (labels[i] == k)
        for (std::size_t j = 0; j < d; ++j) within += (f.row(i)[j] - mean[j]) * (f.row(i)[j] - mean[j]);
  }
  const double kk = static_cast<double>(populated), n = static_cast<double>(f.rows);
  return (between / (kk - 1.0)) / (within / (n - kk));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double ab = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  const double aa = std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
  const double bb = std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("single active bin yields a normalized triangle") {
  amplify::PowerSpectrogram p;
  p.values = RealMatrix(5, 65, 0.0);
  p.values(2, 20) = 4.0;
  EnvelopeParams params;
  params.dimension = 64;
  params.bin_hi = 63;  // 64 bins onto 64 points: the resampling is the identity
  const auto env = spectral_envelope(p, {0, 5}, params);
  REQUIRE(env.size() == 64);
  for (std::size_t i = 0; i < env.size(); ++i) {
    const double expected = (i >= 19 && i <= 21) ? 1.0 / std::sqrt(3.0) : 0.0;
    CHECK(env[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("envelope ignores overall level and rejects empty segments") {
  Rng rng(1);
  amplify::PowerSpectrogram p;
  p.values = RealMatrix(8, 129, 0.0);
  for (auto& v : p.values.data) v = rng.uniform();
  amplify::PowerSpectrogram q = p;
  for (auto& v : q.values.data) v *= 37.0;
  const auto a = spectral_envelope(p, {1, 6});
  const auto b = spectral_envelope(q, {1, 6});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] >= 0.0);
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(spectral_envelope(p, {3, 3}), Error);
}

TEST_CASE("feature concatenation") {
  const std::vector<std::vector<double>> one{{1.0, 2.0, 3.0}};
  CHECK(build_feature(one) == one[0]);
  const std::vector<std::vector<double>> three(3, std::vector<double>(64, 0.5));
  CHECK(build_feature(three).size() == 192);
  FeatureMatrix f;
  f.append(build_feature(three));
  const std::vector<std::vector<double>> two(2, std::vector<double>(64, 0.5));
  CHECK_THROWS_AS(f.append(build_feature(two)), Error);
}

TEST_CASE("GMM separates two blobs like the nearest-center oracle") {
  std::vector<int> truth;
  const auto f = blobs({{0.0, 0.0}, {5.0, 5.0}}, 40, 0.1, 3, &truth);
  const auto r = gmm_cluster(f, 2, 7);
  CHECK(metrics::success_rate(r.labels, truth) == 1.0);
  CHECK(r.monotone);
  CHECK(std::accumulate(r.weights.begin(), r.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t h = 1; h < r.objective_history.size(); ++h)
    CHECK(r.objective_history[h] >= r.objective_history[h - 1] - 1e-12 * (1.0 + std::abs(r.objective_history[h - 1])));
}

TEST_CASE("GMM degenerate and invariance cases") {
  const auto f = blobs({{0.0, 0.0, 1.0}, {3.0, 0.0, 1.0}, {0.0, 3.0, 1.0}}, 15, 0.2, 5);
  SUBCASE("one component") {
    const auto r = gmm_cluster(f, 1, 1);
    CHECK(std::all_of(r.labels.begin(), r.labels.end(), [](int l) { return l == 0; }));
  }
  SUBCASE("duplicated rows share labels") {
    FeatureMatrix dup;
    for (std::size_t i = 0; i < f.rows; ++i) {
      dup.append(f.row(i));
      dup.append(f.row(i));
    }
    const auto r = gmm_cluster(dup, 3, 2);
    for (std::size_t i = 0; i < f.rows; ++i) CHECK(r.labels[2 * i] == r.labels[2 * i + 1]);
  }
  SUBCASE("deterministic per seed, labels in range") {
    const auto a = gmm_cluster(f, 3, 9), b = gmm_cluster(f, 3, 9);
    CHECK(a.labels == b.labels);
    CHECK(a.objective == b.objective);
    for (int l : a.labels) {
      CHECK(l >= 0);
      CHECK(l < 3);
    }
  }
  SUBCASE("global scaling permutes labels at most") {
    FeatureMatrix scaled = f;
    for (auto& v : scaled.data) v *= 1000.0;
    const auto a = gmm_cluster(f, 3, 4), b = gmm_cluster(scaled, 3, 4);
    CHECK(metrics::success_rate(b.labels, a.labels) == 1.0);
  }
}

TEST_CASE("CH index matches its definition") {
  Rng rng(2);
  const auto f = blobs({{0, 0}, {2, 1}, {1, 3}}, 10, 0.5, 8);
  std::vector<int> labels(f.rows);
  for (auto& l : labels) l = static_cast<int>(rng.index(3));
  CHECK(calinski_harabasz(f, labels) == doctest::Approx(ch_oracle(f, labels)).epsilon(1e-12));
  CHECK(calinski_harabasz(f, labels) > 0.0);
  const std::vector<int> single(f.rows, 0);
  CHECK(calinski_harabasz(f, single) == 0.0);
  // Empty label ids in between do not count as clusters.
  std::vector<int> sparse(labels);
  for (auto& l : sparse) l *= 2;
  CHECK(calinski_harabasz(f, sparse) == doctest::Approx(ch_oracle(f, labels)).epsilon(1e-12));
}

TEST_CASE("speaker count on separated blobs") {
  const std::vector<std::vector<double>> centers{{0, 0, 0}, {1.5, 0, 0}, {0, 1.5, 0}, {0, 0, 1.5}};
  for (std::size_t n : {2u, 3u}) {
    const std::vector<std::vector<double>> use(centers.begin(), centers.begin() + n);
    const auto f = blobs(use, 12, 0.01, 10 + n);
    const auto est = estimate_num_speakers(f, 5, 3);
    CHECK(est.speakers == n);
    CHECK(est.monotone);
    REQUIRE(est.candidates.size() == 4);
    // The reported scores are the definitional CH of each fit, and the
    // chosen N is their maximum.
    const auto best = std::max_element(est.ch_scores.begin(), est.ch_scores.end());
    CHECK(est.candidates[static_cast<std::size_t>(best - est.ch_scores.begin())] == n);
    CHECK(*best == doctest::Approx(ch_oracle(f, est.clustering.labels)).epsilon(1e-9));
  }
  const auto few = blobs({{0.0}, {1.0}}, 2, 0.01, 1);
  CHECK_THROWS_AS(estimate_num_speakers(few, 5, 1), Error);
}

TEST_CASE("envelopes separate speakers more than digits") {
  // Speaker 0 says digits 3 and 7, speaker 1 says digit 3; ground-truth
  // vibration only, so no radar frames are synthesized.
  synth::RadarConfig radar;
  const double rate = radar.slow_time_rate();
  synth::Scene scene;
  scene.duration = 3.2;
  const double lengths = 0.5;
  const std::vector<std::pair<int, int>> turns{{0, 3}, {0, 7}, {1, 3}};
  for (int s = 0; s < 2; ++s) {
    synth::Speaker spk;
    spk.label = "P" + std::to_string(s + 1);
    spk.position = synth::seat_position(s == 0 ? 0 : 2, 1.1);
    spk.waveform.sample_rate = rate;
    spk.waveform.samples.assign(static_cast<std::size_t>(scene.duration * rate), 0.0);
    scene.speakers.push_back(spk);
  }
  Rng rng(4);
  for (std::size_t k = 0; k < turns.size(); ++k) {
    const auto [s, digit] = turns[k];
    const double start = 0.6 + 0.9 * static_cast<double>(k);
    auto& spk = scene.speakers[static_cast<std::size_t>(s)];
    const auto u = synth::synthesize_utterance(synth::default_voice(static_cast<std::size_t>(s)), digit, lengths, rate, rng);
    const auto at = static_cast<std::size_t>(start * rate);
    std::copy(u.begin(), u.end(), spk.waveform.samples.begin() + static_cast<long>(at));
    spk.active_intervals.push_back({start, start + lengths});
    spk.digits.push_back(digit);
  }
  for (std::size_t o = 0; o < 3; ++o) {
    auto obj = testing::foil(Vec3(1.1, -0.25 + 0.25 * static_cast<double>(o), 0.0), "o" + std::to_string(o));
    obj.natural_frequency = kTwoPi * (160.0 + 40.0 * static_cast<double>(o));
    scene.objects.push_back(obj);
  }
  const synth::SceneSynthesizer syn(scene, radar, 1);
  const auto& truth = syn.truth();
  REQUIRE(truth.segments.size() == 3);
  std::vector<std::vector<double>> features;
  for (const auto& seg : truth.segments) {
    std::vector<std::vector<double>> envs;
    for (const auto& obj : truth.objects) {
      const auto p = amplify::auto_power_spectrum(obj.clean_stft);
      const std::size_t hop = obj.clean_stft.params.hop;
      const IndexInterval frames{seg.samples.begin / hop, std::min(p.values.rows, seg.samples.end / hop)};
      EnvelopeParams ep;
      ep.bin_lo = 1;
      ep.bin_hi = 22;  // about 1 kHz
      envs.push_back(spectral_envelope(p, frames, ep));
    }
    features.push_back(build_feature(envs));
  }
  const double same_speaker = cosine(features[0], features[1]);
  const double same_digit = cosine(features[0], features[2]);
  CHECK(same_digit < same_speaker);
}
