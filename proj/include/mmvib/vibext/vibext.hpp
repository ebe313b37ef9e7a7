#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mmvib/core/types.hpp"

// Speech activity detection and speech-aware circle-fit calibration of a
// target's IQ trajectory.
namespace mmvib::vibext {

struct IQSeries {
  ComplexSeries samples;
  double frame_rate = 0.0;  // Hz

  /// Throws unless every sample is finite and there are at least 16.
  void validate() const;
};

struct SadParams {
  double band_lo = 50.0;
  double band_hi = 1000.0;
  double smoothing = 0.05;      // s, moving average of the envelope
  double threshold_mads = 3.0;  // k in median + k * sigma_MAD
  double min_interval = 0.10;   // s
  double merge_gap = 0.15;      // s
};

struct SpeechSegments {
  std::vector<IndexInterval> intervals;  // sorted, disjoint sample ranges
  double threshold_used = 0.0;
};

/// Envelope thresholding of the band-limited phase about a coarse circle
/// center. The threshold uses the MAD scaled to a Gaussian sigma.
SpeechSegments detect_speech_segments(const IQSeries& iq, const SadParams& params = {});

struct CircleFit {
  cplx center;
  double radius = 0.0;
  double residual = 0.0;  // RMS of |p - c| - r
  std::size_t iterations = 0;
  bool converged = false;
};

struct RadiusConstraint {
  double r0 = 0.0;
  double gamma = 0.1;  // radius stays in [(1 - gamma) r0, (1 + gamma) r0]
};

struct FitOptions {
  std::size_t max_iterations = 200;
  double step_tolerance = 1e-10;  // in coordinates normalized by the point spread
  std::optional<cplx> initial_center;  // replaces the Kasa start; radius starts at the constraint's r0
};

/// Algebraic least-squares circle; throws a degenerate-fit error for fewer
/// than 3 points or collinear points.
CircleFit kasa_fit(std::span<const cplx> points);

/// Geometric fit minimizing sum (|p - c| - r)^2 by Levenberg-Marquardt from the
/// Kasa estimate (or a given start). With a constraint, r is kept inside the
/// bounds by projection.
CircleFit fit_circle(std::span<const cplx> points, std::optional<RadiusConstraint> constraint = std::nullopt,
                     const FitOptions& options = {});

double circle_objective(std::span<const cplx> points, cplx center, double radius);

struct PhaseSignal {
  RealSeries values;  // rad per slow-time sample
  double frame_rate = 0.0;
  std::size_t target = 0;
  SpeechSegments segments;
  CircleFit silence_fit;
  std::vector<CircleFit> speech_fits;  // one per segment
  bool fallback = false;               // true when calibrated with a single circle instead
};

struct CalibrationParams {
  double gamma = 0.1;
  std::size_t min_samples = 16;
  double transition = 0.1;  // s, center blend between c0 and c_s around segment edges
  double edge_trim = 0.1;   // s dropped from both ends of a segment before its fit
};

/// Silence samples fix the radius; each speech segment gets its own center
/// from a radius-constrained fit of its interior, started from the silence
/// circle. The phase is the unwrapped angle about the
/// (blended) center with the global mean removed. Throws a
/// calibration-impossible error without enough silence or speech samples.
PhaseSignal speech_aware_calibrate(const IQSeries& iq, const SpeechSegments& segments, const CalibrationParams& params = {},
                                   std::size_t target = 0);

/// One unconstrained circle over all samples, unwrapped phase about its center.
PhaseSignal single_circle_calibrate(const IQSeries& iq, const SpeechSegments& segments, std::size_t target = 0);

/// speech_aware_calibrate, falling back to single_circle_calibrate (flagged)
/// when calibration is impossible.
PhaseSignal calibrate(const IQSeries& iq, const SpeechSegments& segments, const CalibrationParams& params = {},
                      std::size_t target = 0);

/// IQ scatter (every `stride`-th sample, with its speech segment or -1) plus
/// the fitted circles, for plotting.
void write_circle_dump(const std::filesystem::path& path, const IQSeries& iq, const PhaseSignal& signal,
                       std::size_t stride = 1);

}  // namespace mmvib::vibext
