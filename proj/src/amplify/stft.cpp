#include "mmvib/amplify/stft.hpp"

#include <algorithm>
#include <cmath>

#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"

namespace mmvib::amplify {

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

void check_cola(const StftParams& params) {
  require(params.window >= 4 && params.window % 2 == 0, ErrorKind::Parameter, "STFT window must be even and >= 4");
  require(params.hop >= 1 && params.hop <= params.window, ErrorKind::Parameter, "STFT hop must be in [1, window]");
  const auto w = hann_window(params.window);
  double lo = 1e300, hi = -1e300;
  for (std::size_t n = 0; n < params.hop; ++n) {
    double s = 0.0;
    for (std::size_t i = n; i < params.window; i += params.hop) s += w[i];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  require(hi - lo <= 1e-10 * hi, ErrorKind::Parameter,
          "Hann window " + std::to_string(params.window) + " with hop " + std::to_string(params.hop) +
              " does not satisfy constant overlap-add");
}

STFTMatrix stft(std::span<const double> signal, double frame_rate, const StftParams& params) {
  check_cola(params);
  require(signal.size() >= params.window, ErrorKind::InsufficientData, "signal shorter than the STFT window");
  const std::size_t win = params.window, hop = params.hop;
  const std::size_t frames = 1 + (signal.size() - win + hop - 1) / hop;
  const std::size_t padded = (frames - 1) * hop + win;
  std::vector<double> x(padded, 0.0);
  std::copy(signal.begin(), signal.end(), x.begin());

  STFTMatrix m;
  m.params = params;
  m.frame_rate = frame_rate;
  m.signal_length = signal.size();
  m.values = ComplexMatrix(frames, win / 2 + 1);
  const auto w = hann_window(win);
  std::vector<double> buf(win);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < win; ++i) buf[i] = w[i] * x[t * hop + i];
    const auto spec = fft::rfft(buf);
    std::copy(spec.begin(), spec.end(), m.values.data.begin() + static_cast<std::ptrdiff_t>(t * m.values.cols));
  }
  return m;
}

RealSeries istft(const STFTMatrix& m) {
  check_cola(m.params);
  const std::size_t win = m.params.window, hop = m.params.hop;
  require(m.bins() == win / 2 + 1, ErrorKind::ShapeMismatch, "STFT bins do not match window");
  const std::size_t padded = m.frames() == 0 ? 0 : (m.frames() - 1) * hop + win;
  std::vector<double> acc(padded, 0.0), norm(padded, 0.0);
  const auto w = hann_window(win);
  for (std::size_t t = 0; t < m.frames(); ++t) {
    std::span<const cplx> row(m.values.data.data() + t * m.values.cols, m.values.cols);
    const auto frame = fft::irfft(row, win);
    for (std::size_t i = 0; i < win; ++i) {
      acc[t * hop + i] += w[i] * frame[i];
      norm[t * hop + i] += w[i] * w[i];
    }
  }
  // Only the outermost samples see a window sum below the floor; dividing
  // them by the raw sum would blow up any inconsistency of a modified STFT.
  double steady = 0.0;
  for (double v : w) steady += v * v;
  const double floor = kEdgeNormFloor * steady / static_cast<double>(hop);
  RealSeries out(std::min(m.signal_length, padded), 0.0);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = acc[n] / std::max(norm[n], floor);
  out.resize(m.signal_length, 0.0);
  return out;
}

}  // namespace mmvib::amplify
