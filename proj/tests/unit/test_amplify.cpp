#include <doctest.h>

#include <cmath>

#include "mmvib/amplify/filters.hpp"
#include "mmvib/amplify/spectral_subtraction.hpp"
#include "mmvib/amplify/stft.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/rng.hpp"
#include "mmvib/core/stats.hpp"

using namespace mmvib;
using namespace mmvib::amplify;

namespace {

constexpr double kRate = 128.0 / 10.64e-3;

RealSeries tone(double hz, double amplitude, std::size_t n, double rate = kRate, double phase = 0.0) {
  RealSeries x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amplitude * std::cos(kTwoPi * hz * static_cast<double>(i) / rate + phase);
  return x;
}

double peak_abs(const RealSeries& x, std::size_t from, std::size_t to) {
  double p = 0.0;
  for (std::size_t i = from; i < to; ++i) p = std::max(p, std::abs(x[i]));
  return p;
}

// Squared magnitude of a prewarped analog Butterworth bandpass of the given
// lowpass-prototype order: 1 / (1 + ((W^2 - W0^2) / (W B))^(2 order)).
double analytic_bandpass_power(double hz, double lo, double hi, double rate, int order) {
  auto warp = [&](double f) { return 2.0 * rate * std::tan(kPi * f / rate); };
  const double w = warp(hz), wl = warp(lo), wh = warp(hi);
  const double x = (w * w - wl * wh) / (w * (wh - wl));
  return 1.0 / (1.0 + std::pow(x * x, order));
}

STFTMatrix random_stft(std::size_t frames, std::size_t bins, std::uint64_t seed) {
  Rng rng(seed);
  STFTMatrix m;
  m.values = ComplexMatrix(frames, bins);
  m.params = {2 * (bins - 1), (bins - 1) / 2};
  m.frame_rate = kRate;
  for (auto& v : m.values.data) v = rng.complex_normal(1.0);
  return m;
}

}  // namespace

TEST_CASE("bandpass passes the voice band and rejects the rest") {
  const std::size_t n = 24000, trim = 3000;
  const auto pass = bandpass_filter(tone(500.0, 1.0, n), 50.0, 1000.0, kRate);
  CHECK(peak_abs(pass, trim, n - trim) == doctest::Approx(1.0).epsilon(0.01));

  const auto stop = bandpass_filter(tone(3000.0, 1.0, n), 50.0, 1000.0, kRate);
  const double measured_db = 20.0 * std::log10(peak_abs(stop, trim, n - trim));
  // Zero-phase filtering applies |H|^2.
  const double analytic_db = 20.0 * std::log10(analytic_bandpass_power(3000.0, 50.0, 1000.0, kRate, 4));
  CHECK(measured_db <= -40.0);
  CHECK(measured_db == doctest::Approx(analytic_db).epsilon(0.02));

  const auto dc = bandpass_filter(RealSeries(n, 3.0), 50.0, 1000.0, kRate);
  CHECK(std::abs(stats::mean(dc)) < 1e-3);
}

TEST_CASE("filter response matches the analytic Butterworth magnitude") {
  const auto f = butterworth_bandpass(50.0, 1000.0, kRate, 4);
  CHECK(f.sections.size() == 4);
  for (double hz : {20.0, 50.0, 120.0, 400.0, 1000.0, 1500.0, 4000.0}) {
    const double got = std::norm(f.response(hz));
    CHECK(got == doctest::Approx(analytic_bandpass_power(hz, 50.0, 1000.0, kRate, 4)).epsilon(1e-6));
  }
}

TEST_CASE("invalid bands are parameter errors") {
  const RealSeries x(1000, 0.0);
  CHECK_THROWS_AS(bandpass_filter(x, 1000.0, 50.0, kRate), Error);
  CHECK_THROWS_AS(bandpass_filter(x, 0.0, 50.0, kRate), Error);
  CHECK_THROWS_AS(bandpass_filter(x, 50.0, kRate, kRate), Error);
}

TEST_CASE("stft round trip and shape") {
  Rng rng(1);
  RealSeries x(5000);
  for (auto& v : x) v = rng.normal();
  const auto m = stft(x, kRate);
  CHECK(m.bins() == 129);
  const auto y = istft(m);
  REQUIRE(y.size() == x.size());
  double err = 0.0;
  for (std::size_t i = 256; i + 256 < x.size(); ++i) err = std::max(err, std::abs(y[i] - x[i]));
  CHECK(err < 1e-10);

  CHECK_THROWS_AS(stft(x, kRate, {256, 100}), Error);
  CHECK_THROWS_AS(check_cola({256, 100}), Error);
  CHECK_NOTHROW(check_cola({512, 128}));
  CHECK_THROWS_AS(stft(RealSeries(100, 0.0), kRate), Error);
}

TEST_CASE("bin-centered tone lands in one bin") {
  const double rate = 8000.0;
  const double hz = 20.0 * rate / 256.0;
  const auto m = stft(tone(hz, 1.0, 4096, rate), rate);
  for (std::size_t t = 4; t + 4 < m.frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < m.bins(); ++k)
      if (std::abs(m.values(t, k)) > std::abs(m.values(t, best))) best = k;
    CHECK(best == 20);
  }
}

TEST_CASE("stft energy obeys Parseval with the window correction") {
  Rng rng(6);
  const StftParams p{256, 64};
  // Zeros at both ends so every nonzero sample is covered by a full overlap.
  RealSeries x(4096, 0.0);
  for (std::size_t i = 256; i < x.size() - 256; ++i) x[i] = rng.normal();
  const auto m = stft(x, kRate, p);
  const auto w = hann_window(p.window);
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  double spectral = 0.0;
  for (std::size_t t = 0; t < m.frames(); ++t)
    for (std::size_t k = 0; k < m.bins(); ++k) {
      const double e = std::norm(m.values(t, k));
      spectral += (k == 0 || k == m.bins() - 1) ? e : 2.0 * e;
    }
  double energy = 0.0;
  for (double v : x) energy += v * v;
  const double expected = energy * static_cast<double>(p.window) * w2 / static_cast<double>(p.hop);
  CHECK(std::abs(spectral - expected) / expected < 1e-6);
}

TEST_CASE("spectral subtraction contract") {
  const auto y = random_stft(40, 33, 2);
  NoiseProfile noise;
  noise.magnitude.assign(33, 0.0);
  noise.frames_used = 1;
  SUBCASE("zero noise is the identity") {
    // Exact in the polar form; the Cartesian rebuild rounds in the last bit.
    const auto polar = spectral_subtract(y, noise, {2.0, 0.01});
    const auto out = polar.to_complex();
    for (std::size_t i = 0; i < y.values.data.size(); ++i) {
      CHECK(polar.magnitude.data[i] == std::abs(y.values.data[i]));
      CHECK(polar.phase.data[i] == std::arg(y.values.data[i]));
      CHECK(std::abs(out.values.data[i] - y.values.data[i]) <= 1e-15 * std::abs(y.values.data[i]));
    }
  }
  SUBCASE("phase is kept and magnitude is bounded") {
    Rng rng(3);
    for (auto& d : noise.magnitude) d = rng.uniform(0.0, 2.0);
    const SubtractionParams params{2.0, 0.01};
    const auto out = spectral_subtract(y, noise, params);
    for (std::size_t t = 0; t < y.frames(); ++t)
      for (std::size_t k = 0; k < y.bins(); ++k) {
        const double mag = std::abs(y.values(t, k));
        CHECK(out.phase(t, k) == std::arg(y.values(t, k)));
        CHECK(out.magnitude(t, k) >= params.spectral_floor_beta * mag);
        CHECK(out.magnitude(t, k) <= mag);
      }
  }
  SUBCASE("floor engages when the magnitude equals the noise estimate") {
    STFTMatrix flat = y;
    for (auto& v : flat.values.data) v = std::polar(0.7, std::arg(v));
    noise.magnitude.assign(33, 0.7);
    const auto out = spectral_subtract(flat, noise, {1.0, 0.05});
    for (double m : out.magnitude.data) CHECK(m == doctest::Approx(0.05 * 0.7).epsilon(1e-12));
  }
}

TEST_CASE("spectral subtraction gains at least 6 dB on a 10 dB tone") {
  const double rate = 8000.0, amp = 1.0;
  const std::size_t n = 24000, lead = 4000;
  const double sigma = std::sqrt(amp * amp / 2.0 / 10.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    RealSeries clean = tone(20.0 * rate / 256.0, amp, n, rate);
    for (std::size_t i = 0; i < lead; ++i) clean[i] = 0.0;
    RealSeries noisy(n);
    for (std::size_t i = 0; i < n; ++i) noisy[i] = clean[i] + rng.normal(0.0, sigma);
    const auto s = stft(clean, rate), yn = stft(noisy, rate);
    std::vector<std::size_t> quiet;
    for (std::size_t t = 0; t * 64 + 256 <= lead; ++t) quiet.push_back(t);
    const auto x = spectral_subtract(yn, estimate_noise_profile(yn, quiet)).to_complex();
    auto snr = [&](const STFTMatrix& m) {
      double sig = 0.0, err = 0.0;
      for (std::size_t i = 0; i < s.values.data.size(); ++i) {
        sig += std::norm(s.values.data[i]);
        err += std::norm(m.values.data[i] - s.values.data[i]);
      }
      return 10.0 * std::log10(sig / err);
    };
    CHECK(snr(x) - snr(yn) >= 6.0);
  }
}

TEST_CASE("noise profile averages the listed frames") {
  const auto y = random_stft(30, 9, 4);
  const std::vector<std::size_t> frames{3, 5, 7};
  const auto p = estimate_noise_profile(y, frames, 2);
  CHECK(p.frames_used == 2);
  for (std::size_t k = 0; k < 9; ++k)
    CHECK(p.magnitude[k] == doctest::Approx((std::abs(y.values(3, k)) + std::abs(y.values(5, k))) / 2.0));
  CHECK_THROWS_AS(estimate_noise_profile(y, std::vector<std::size_t>{}), Error);
}

TEST_CASE("auto power spectrum") {
  auto x = random_stft(10, 5, 8);
  x.values(0, 0) = std::polar(1.0, 0.4);
  const auto p = auto_power_spectrum(x);
  CHECK(p.values(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  const cplx c(0.3, -2.0);
  STFTMatrix scaled = x;
  for (auto& v : scaled.values.data) v *= c;
  const auto ps = auto_power_spectrum(scaled);
  for (std::size_t i = 0; i < p.values.data.size(); ++i) {
    CHECK(p.values.data[i] >= 0.0);
    CHECK(ps.values.data[i] == doctest::Approx(std::norm(c) * p.values.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("frame-averaged power splits into signal and residual power") {
  // |S + R|^2 = |S|^2 + |R|^2 + 2 Re(S conj R); with zero-mean R the cross
  // term averages out at the rate of its own standard error.
  const std::size_t frames = 4000;
  int inside = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(100 + seed);
    const cplx s = std::polar(1.5, rng.uniform(0.0, kTwoPi));
    const double r_std = 0.8;
    STFTMatrix x;
    x.values = ComplexMatrix(frames, 1);
    std::vector<double> cross(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      const cplx r = rng.complex_normal(r_std);
      x.values(t, 0) = s + r;
      cross[t] = 2.0 * std::real(s * std::conj(r));
    }
    const auto p = auto_power_spectrum(x);
    double mean_p = 0.0;
    for (double v : p.values.data) mean_p += v;
    mean_p /= static_cast<double>(frames);
    const double se = std::sqrt(stats::variance(cross) / static_cast<double>(frames));
    // |R|^2 also fluctuates; its sampling error adds in quadrature.
    double r2_var = r_std * r_std * r_std * r_std;
    const double tol = 3.0 * std::sqrt(se * se + r2_var / static_cast<double>(frames));
    if (std::abs(mean_p - (std::norm(s) + r_std * r_std)) <= tol) ++inside;
  }
  CHECK(inside >= seeds - 1);
}
