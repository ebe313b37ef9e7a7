#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mmvib/synth/synthesizer.hpp"

// Target detection: range FFT, range-angle map, and kurtosis ranking of the
// map's local maxima.
namespace mmvib::radarcube {

/// Range FFT output indexed (frame, chirp, rx, range-bin).
struct RangeSpectrum {
  std::size_t frames = 0, chirps = 0, rx = 0, bins = 0;
  std::vector<cplx> data;
  synth::RadarConfig config;

  const cplx& at(std::size_t f, std::size_t c, std::size_t r, std::size_t k) const {
    return data[((f * chirps + c) * rx + r) * bins + k];
  }
  std::size_t slow_time_samples() const { return frames * chirps; }
};

/// Hann-windowed FFT along fast time; bin k covers range k * c / (2 * bandwidth).
RangeSpectrum range_fft(const synth::RadarCube& cube);
/// Range FFT of a single chirp (rx x fast-time in, rx x range-bin out).
void range_fft_chirp(std::span<const cplx> chirp, std::size_t rx, std::size_t samples, std::span<cplx> out);

struct RangeAngleMap {
  RealMatrix magnitude;  // range-bin x angle-bin
  double range_resolution = 0.0;  // m per bin
  double rx_spacing = 1.0;        // multiples of lambda/2
  std::size_t chirps_used = 0;

  std::size_t range_bins() const { return magnitude.rows; }
  std::size_t angle_bins() const { return magnitude.cols; }
  double range_of(std::size_t bin) const { return static_cast<double>(bin) * range_resolution; }
  /// Azimuth (rad) at the center of an angle bin; NaN outside the visible region.
  double azimuth_of(std::size_t bin) const;
  /// Angular bin width at boresight, degrees.
  double angle_resolution_deg() const;
};

/// Angle FFT across rx (zero-padded to `angle_bins`, zero spatial frequency
/// at the center bin), magnitude averaged over all frames and chirps.
RangeAngleMap range_angle_map(const RangeSpectrum& spectrum, std::size_t angle_bins = synth::kDefaultAngleBins);
/// Streaming variant: averages over every `chirp_stride`-th chirp of the source.
RangeAngleMap range_angle_map(const synth::CubeSource& source, std::size_t chirp_stride = 1,
                              std::size_t angle_bins = synth::kDefaultAngleBins);

/// Pearson kurtosis (fourth standardized moment, normal = 3).
double phase_kurtosis(std::span<const double> phase);

struct Cell {
  std::size_t range_bin = 0;
  std::size_t angle_bin = 0;
  double magnitude = 0.0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct SelectionParams {
  std::size_t targets = 3;          // M
  double floor_mads = 5.0;          // noise floor = median + k * MAD of the map
  std::size_t max_candidates = 24;  // strongest local maxima kept for phase extraction
  double band_lo = 50.0;            // kurtosis is taken on the phase limited to this band
  double band_hi = 1000.0;
  bool band_limit = true;
  double neighbor_ratio = 0.3;      // reject maxima below this fraction of a stronger one within +-1 range bin
  double column_ratio = 0.05;       // same, along the angle column within +-column_span range bins
  std::size_t column_span = 8;
};

/// Local maxima of the map above the floor, strongest first, sidelobes removed.
std::vector<Cell> candidate_cells(const RangeAngleMap& map, const SelectionParams& params);

/// Complex cell value per chirp: range bin of every rx, combined by the angle
/// DFT at the cell's angle bin.
std::vector<ComplexSeries> extract_cell_series(const synth::CubeSource& source, std::span<const Cell> cells,
                                               std::size_t angle_bins = synth::kDefaultAngleBins);
std::vector<ComplexSeries> extract_cell_series(const RangeSpectrum& spectrum, std::span<const Cell> cells,
                                               std::size_t angle_bins = synth::kDefaultAngleBins);

struct TargetCandidate {
  std::size_t range_bin = 0;
  std::size_t angle_bin = 0;
  double range = 0.0;    // m
  double azimuth = 0.0;  // rad
  double magnitude = 0.0;
  double kurtosis = 0.0;     // NaN when the phase has zero variance
  ComplexSeries iq;          // per slow-time sample
  RealSeries phase_series;   // unwrapped angle of iq
};

/// Scores candidates by kurtosis and keeps the top M, ordered by
/// (kurtosis desc, magnitude desc, range asc).
std::vector<TargetCandidate> rank_targets(std::vector<TargetCandidate> candidates, const RangeAngleMap& map,
                                          double sample_rate, const SelectionParams& params);

std::vector<TargetCandidate> select_targets(const RangeAngleMap& map, const RangeSpectrum& spectrum,
                                            const SelectionParams& params);
std::vector<TargetCandidate> select_targets(const RangeAngleMap& map, const synth::CubeSource& source,
                                            const SelectionParams& params);

void write_range_angle_csv(const std::filesystem::path& path, const RangeAngleMap& map);
/// One row per target: rank, bins, range (m), azimuth (deg), magnitude, kurtosis.
void write_target_report(const std::filesystem::path& path, std::span<const TargetCandidate> targets);

}  // namespace mmvib::radarcube
