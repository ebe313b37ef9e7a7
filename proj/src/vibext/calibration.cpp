#include <algorithm>
#include <cmath>

#include "mmvib/amplify/filters.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/io.hpp"
#include "mmvib/core/stats.hpp"
#include "mmvib/vibext/vibext.hpp"

namespace mmvib::vibext {
namespace {

constexpr std::size_t kCoarseFitPoints = 20000;

// Circle through a thinned copy of the trajectory; the origin when the
// trajectory is degenerate.
cplx coarse_center(std::span<const cplx> samples) {
  const std::size_t stride = std::max<std::size_t>(1, samples.size() / kCoarseFitPoints);
  std::vector<cplx> pts;
  for (std::size_t i = 0; i < samples.size(); i += stride) pts.push_back(samples[i]);
  try {
    return fit_circle(pts).center;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateFit) throw;
    return 0.0;
  }
}

RealSeries centered_phase(std::span<const cplx> samples, cplx center) {
  RealSeries ph(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) ph[i] = std::arg(samples[i] - center);
  return stats::unwrap(ph);
}

// median + k * sigma_MAD of the envelope's noise floor. Statistics are
// re-estimated on the samples below the current threshold, starting from the
// lower half, so long speech stretches do not inflate the MAD. On a pure-noise
// envelope the fixed point is the plain median + k * sigma_MAD.
double noise_floor_threshold(std::span<const double> env, double k) {
  const double overall_median = stats::median(env);
  std::vector<double> floor;
  for (double v : env)
    if (v <= overall_median) floor.push_back(v);
  double threshold = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    const double next = stats::median(floor) + k * stats::kMadToSigma * stats::mad(floor);
    if (iter > 0 && next == threshold) break;
    threshold = next;
    floor.clear();
    for (double v : env)
      if (v <= threshold) floor.push_back(v);
  }
  return threshold;
}

void remove_mean(RealSeries& x) {
  const double m = stats::mean(x);
  for (auto& v : x) v -= m;
}

}  // namespace

void IQSeries::validate() const {
  require(samples.size() >= 16, ErrorKind::InsufficientData, "IQ series needs at least 16 samples");
  require(frame_rate > 0.0, ErrorKind::Parameter, "IQ series needs a positive frame rate");
  for (const auto& z : samples)
    require(std::isfinite(z.real()) && std::isfinite(z.imag()), ErrorKind::Parameter, "IQ series has non-finite samples");
}

SpeechSegments detect_speech_segments(const IQSeries& iq, const SadParams& params) {
  iq.validate();
  require(iq.frame_rate > 2000.0, ErrorKind::Parameter, "speech detection needs a frame rate above 2 kHz");
  const double rate = iq.frame_rate;
  const auto width = static_cast<std::size_t>(std::llround(params.smoothing * rate));
  require(width >= 1 && iq.samples.size() >= width, ErrorKind::InsufficientData,
          "series shorter than the envelope smoothing window");

  const auto phase = centered_phase(iq.samples, coarse_center(iq.samples));
  const auto band = amplify::bandpass_filter(phase, params.band_lo, params.band_hi, rate);
  const auto env = amplify::moving_average(amplify::analytic_envelope(band), width);

  SpeechSegments out;
  out.threshold_used = noise_floor_threshold(env, params.threshold_mads);

  std::vector<IndexInterval> raw;
  for (std::size_t i = 0; i < env.size();) {
    if (env[i] <= out.threshold_used) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < env.size() && env[j] > out.threshold_used) ++j;
    raw.push_back({i, j});
    i = j;
  }

  const auto merge_gap = static_cast<std::size_t>(std::llround(params.merge_gap * rate));
  const auto min_len = static_cast<std::size_t>(std::llround(params.min_interval * rate));
  std::vector<IndexInterval> merged;
  for (const auto& iv : raw) {
    if (!merged.empty() && iv.begin - merged.back().end < merge_gap) merged.back().end = iv.end;
    else merged.push_back(iv);
  }
  for (const auto& iv : merged)
    if (iv.length() >= min_len) out.intervals.push_back(iv);
  return out;
}

PhaseSignal speech_aware_calibrate(const IQSeries& iq, const SpeechSegments& segments, const CalibrationParams& params,
                                   std::size_t target) {
  iq.validate();
  const std::size_t n = iq.samples.size();
  std::vector<int> seg_of(n, -1);
  for (std::size_t k = 0; k < segments.intervals.size(); ++k) {
    const auto& iv = segments.intervals[k];
    require(iv.begin < iv.end && iv.end <= n, ErrorKind::Parameter, "speech segment outside the IQ series");
    for (std::size_t i = iv.begin; i < iv.end; ++i) seg_of[i] = static_cast<int>(k);
  }
  std::vector<cplx> silence;
  std::size_t speech_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (seg_of[i] < 0) silence.push_back(iq.samples[i]);
    else ++speech_count;
  }
  require(silence.size() >= params.min_samples, ErrorKind::CalibrationImpossible,
          "target " + std::to_string(target) + ": too few silence samples to fit the reference circle");
  require(speech_count >= params.min_samples, ErrorKind::CalibrationImpossible,
          "target " + std::to_string(target) + ": too few speech samples");

  PhaseSignal out;
  out.frame_rate = iq.frame_rate;
  out.target = target;
  out.segments = segments;
  try {
    out.silence_fit = fit_circle(silence);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateFit) throw;
    fail(ErrorKind::CalibrationImpossible, "target " + std::to_string(target) + ": silence samples do not define a circle");
  }

  const RadiusConstraint constraint{out.silence_fit.radius, params.gamma};
  FitOptions from_silence;
  from_silence.initial_center = out.silence_fit.center;
  const auto trim = static_cast<std::size_t>(std::llround(params.edge_trim * iq.frame_rate));
  for (const auto& iv : segments.intervals) {
    IndexInterval core = iv;
    if (iv.length() >= 2 * trim + params.min_samples) core = {iv.begin + trim, iv.end - trim};
    const std::span<const cplx> pts(iq.samples.data() + core.begin, core.length());
    CircleFit fit = out.silence_fit;
    try {
      fit = fit_circle(pts, constraint, from_silence);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateFit) throw;
    }
    out.speech_fits.push_back(fit);
  }

  // The center moves from c0 to each segment's c_s over a raised-cosine
  // transition centered on the segment edges, so the phase stays continuous.
  std::vector<cplx> center(n, out.silence_fit.center);
  std::vector<double> weight(n, 0.0);
  const double ramp = params.transition * iq.frame_rate;
  for (std::size_t k = 0; k < segments.intervals.size(); ++k) {
    const auto& iv = segments.intervals[k];
    const double lo = static_cast<double>(iv.begin) - ramp / 2.0, hi = static_cast<double>(iv.end) + ramp / 2.0;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(lo)));
    const auto last = std::min(n, static_cast<std::size_t>(std::max(0.0, std::ceil(hi))));
    for (std::size_t s = first; s < last; ++s) {
      double w = iv.contains(s) ? 1.0 : 0.0;
      if (ramp > 0.0) {
        const double edge = std::min(static_cast<double>(s) - lo, hi - static_cast<double>(s)) / ramp;
        w = edge < 1.0 ? 0.5 - 0.5 * std::cos(kPi * std::max(edge, 0.0)) : 1.0;
      }
      if (w > weight[s]) {
        weight[s] = w;
        center[s] = out.silence_fit.center + w * (out.speech_fits[k].center - out.silence_fit.center);
      }
    }
  }
  RealSeries raw(n);
  for (std::size_t s = 0; s < n; ++s) raw[s] = std::arg(iq.samples[s] - center[s]);
  out.values = stats::unwrap(raw);
  remove_mean(out.values);
  return out;
}

PhaseSignal single_circle_calibrate(const IQSeries& iq, const SpeechSegments& segments, std::size_t target) {
  iq.validate();
  PhaseSignal out;
  out.frame_rate = iq.frame_rate;
  out.target = target;
  out.segments = segments;
  out.fallback = true;
  out.silence_fit = fit_circle(iq.samples);
  out.speech_fits.assign(segments.intervals.size(), out.silence_fit);
  out.values = centered_phase(iq.samples, out.silence_fit.center);
  remove_mean(out.values);
  return out;
}

PhaseSignal calibrate(const IQSeries& iq, const SpeechSegments& segments, const CalibrationParams& params,
                      std::size_t target) {
  try {
    return speech_aware_calibrate(iq, segments, params, target);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::CalibrationImpossible) throw;
    return single_circle_calibrate(iq, segments, target);
  }
}

void write_circle_dump(const std::filesystem::path& path, const IQSeries& iq, const PhaseSignal& signal,
                       std::size_t stride) {
  require(stride >= 1, ErrorKind::Parameter, "dump stride must be >= 1");
  io::CsvWriter csv(path);
  csv.header({"row", "index", "segment", "re", "im", "radius", "residual"});
  auto circle = [&](std::size_t idx, int seg, const CircleFit& f) {
    csv.cell("circle").cell(idx).cell(seg).cell(f.center.real()).cell(f.center.imag()).cell(f.radius).cell(f.residual);
    csv.end_row();
  };
  circle(0, -1, signal.silence_fit);
  for (std::size_t k = 0; k < signal.speech_fits.size(); ++k) circle(k, static_cast<int>(k), signal.speech_fits[k]);
  std::vector<int> seg_of(iq.samples.size(), -1);
  for (std::size_t k = 0; k < signal.segments.intervals.size(); ++k)
    for (std::size_t i = signal.segments.intervals[k].begin; i < std::min(signal.segments.intervals[k].end, seg_of.size()); ++i)
      seg_of[i] = static_cast<int>(k);
  for (std::size_t i = 0; i < iq.samples.size(); i += stride) {
    csv.cell("sample").cell(i).cell(seg_of[i]).cell(iq.samples[i].real()).cell(iq.samples[i].imag()).cell("").cell("");
    csv.end_row();
  }
}

}  // namespace mmvib::vibext
