#include "mmvib/amplify/filters.hpp"

#include <algorithm>
#include <cmath>

#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"

namespace mmvib::amplify {

cplx SosFilter::response(double hz) const {
  const cplx zinv = std::exp(cplx(0.0, -kTwoPi * hz / sample_rate));
  cplx h(1.0, 0.0);
  for (const auto& s : sections) {
    const cplx num = s.b[0] + s.b[1] * zinv + s.b[2] * zinv * zinv;
    const cplx den = 1.0 + s.a[0] * zinv + s.a[1] * zinv * zinv;
    h *= num / den;
  }
  return h;
}

SosFilter butterworth_bandpass(double lo_hz, double hi_hz, double sample_rate, int order) {
  require(order >= 1, ErrorKind::Parameter, "filter order must be >= 1");
  require(sample_rate > 0.0 && lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < sample_rate / 2.0, ErrorKind::Parameter,
          "bandpass requires 0 < lo < hi < sample_rate/2");

  const double fs2 = 2.0 * sample_rate;
  const double w1 = fs2 * std::tan(kPi * lo_hz / sample_rate);
  const double w2 = fs2 * std::tan(kPi * hi_hz / sample_rate);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  // Analog prototype poles in the upper half plane; their conjugates give the
  // rest, and each one maps to two bandpass poles.
  SosFilter filter;
  filter.sample_rate = sample_rate;
  for (int m = -order + 1; m < order; m += 2) {
    const cplx proto = -std::exp(cplx(0.0, kPi * m / (2.0 * order)));
    if (proto.imag() < 0.0) continue;
    const cplx lp = proto * (bw / 2.0);
    const cplx root = std::sqrt(lp * lp - w0 * w0);
    for (const cplx analog : {lp + root, lp - root}) {
      const cplx z = (fs2 + analog) / (fs2 - analog);
      Biquad s;
      s.b = {1.0, 0.0, -1.0};  // one zero at DC, one at Nyquist
      s.a = {-2.0 * z.real(), std::norm(z)};
      filter.sections.push_back(s);
      if (std::abs(proto.imag()) < 1e-14) break;  // real prototype pole: its pair is already covered
    }
  }
  const double center_hz = std::atan(w0 / fs2) * sample_rate / kPi;
  const double gain = std::abs(filter.response(center_hz));
  for (auto& v : filter.sections.front().b) v /= gain;
  return filter;
}

namespace {

void run_sections(const SosFilter& f, std::vector<double>& x, const std::vector<std::array<double, 2>>& zi) {
  for (std::size_t s = 0; s < f.sections.size(); ++s) {
    const auto& b = f.sections[s].b;
    const auto& a = f.sections[s].a;
    double z1 = zi[s][0], z2 = zi[s][1];
    for (double& v : x) {
      const double y = b[0] * v + z1;
      z1 = b[1] * v - a[0] * y + z2;
      z2 = b[2] * v - a[1] * y;
      v = y;
    }
  }
}

// Steady-state state for a unit step through the cascade, per section.
std::vector<std::array<double, 2>> step_state(const SosFilter& f, double level) {
  std::vector<std::array<double, 2>> zi(f.sections.size());
  double scale = level;
  for (std::size_t s = 0; s < f.sections.size(); ++s) {
    const auto& b = f.sections[s].b;
    const auto& a = f.sections[s].a;
    const double dc = (b[0] + b[1] + b[2]) / (1.0 + a[0] + a[1]);
    zi[s] = {scale * (dc - b[0]), scale * (b[2] - a[1] * dc)};
    scale *= dc;
  }
  return zi;
}

}  // namespace

RealSeries sos_filter(const SosFilter& filter, std::span<const double> x) {
  RealSeries y(x.begin(), x.end());
  run_sections(filter, y, std::vector<std::array<double, 2>>(filter.sections.size(), {0.0, 0.0}));
  return y;
}

RealSeries sos_filtfilt(const SosFilter& filter, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (n == 1) return RealSeries(1, x[0] * std::norm(filter.response(0.0)));
  std::size_t pad = static_cast<std::size_t>(std::ceil(2.0 * filter.sample_rate / 50.0));
  pad = std::clamp<std::size_t>(pad, 27, n - 1);

  RealSeries ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run_sections(filter, ext, step_state(filter, ext.front()));
  std::reverse(ext.begin(), ext.end());
  run_sections(filter, ext, step_state(filter, ext.front()));
  std::reverse(ext.begin(), ext.end());
  return RealSeries(ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

RealSeries bandpass_filter(std::span<const double> signal, double lo_hz, double hi_hz, double sample_rate) {
  return sos_filtfilt(butterworth_bandpass(lo_hz, hi_hz, sample_rate, 4), signal);
}

ComplexSeries bandpass_filter(std::span<const cplx> signal, double lo_hz, double hi_hz, double sample_rate) {
  const auto f = butterworth_bandpass(lo_hz, hi_hz, sample_rate, 4);
  RealSeries re(signal.size()), im(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    re[i] = signal[i].real();
    im[i] = signal[i].imag();
  }
  re = sos_filtfilt(f, re);
  im = sos_filtfilt(f, im);
  ComplexSeries out(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) out[i] = {re[i], im[i]};
  return out;
}

RealSeries analytic_envelope(std::span<const double> x) {
  const std::size_t n = x.size();
  ComplexSeries z(x.begin(), x.end());
  auto spec = fft::forward(z);
  // Keep DC (and Nyquist for even n), double positive frequencies, drop negative.
  const std::size_t half = (n + 1) / 2;
  for (std::size_t k = 1; k < half; ++k) spec[k] *= 2.0;
  for (std::size_t k = n / 2 + 1; k < n; ++k) spec[k] = 0.0;
  const auto a = fft::inverse(spec);
  RealSeries env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(a[i]);
  return env;
}

RealSeries moving_average(std::span<const double> x, std::size_t width) {
  const std::size_t n = x.size();
  RealSeries out(n);
  if (n == 0 || width <= 1) return RealSeries(x.begin(), x.end());
  std::vector<double> csum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) csum[i + 1] = csum[i] + x[i];
  const std::size_t left = (width - 1) / 2;
  const std::size_t right = width - 1 - left;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n, i + right + 1);
    out[i] = (csum[hi] - csum[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace mmvib::amplify
