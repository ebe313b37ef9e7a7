#include "mmvib/radarcube/radarcube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "mmvib/amplify/filters.hpp"
#include "mmvib/amplify/stft.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"
#include "mmvib/core/io.hpp"
#include "mmvib/core/stats.hpp"

namespace mmvib::radarcube {
namespace {

using CMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const std::vector<double>& range_window(std::size_t n) {
  thread_local std::vector<double> w;
  if (w.size() != n) w = amplify::hann_window(n);
  return w;
}

std::size_t effective_angle_bins(std::size_t rx, std::size_t angle_bins) {
  require(angle_bins >= 1, ErrorKind::Parameter, "angle grid needs at least one bin");
  return rx >= 2 ? angle_bins : 1;
}

// Zero-padded angle DFT with zero spatial frequency at the center bin:
// row b holds exp(-j 2 pi (b - bins/2) r / bins).
CMatrix angle_dft(std::size_t rx, std::size_t bins) {
  CMatrix a(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(rx));
  const double half = bins >= 2 ? static_cast<double>(bins / 2) : 0.0;
  for (std::size_t b = 0; b < bins; ++b)
    for (std::size_t r = 0; r < rx; ++r)
      a(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(r)) =
          std::polar(1.0, -kTwoPi * (static_cast<double>(b) - half) * static_cast<double>(r) / static_cast<double>(bins));
  return a;
}

class MapAccumulator {
 public:
  MapAccumulator(std::size_t rx, std::size_t range_bins, std::size_t angle_bins)
      : rx_(rx), range_bins_(range_bins), dft_(angle_dft(rx, angle_bins)),
        sum_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(angle_bins), static_cast<Eigen::Index>(range_bins))) {}

  void add(std::span<const cplx> range_rows) {
    const Eigen::Map<const CMatrix> r(range_rows.data(), static_cast<Eigen::Index>(rx_), static_cast<Eigen::Index>(range_bins_));
    sum_ += (dft_ * r).cwiseAbs();
    ++count_;
  }

  RangeAngleMap finish(const synth::RadarConfig& config) const {
    RangeAngleMap map;
    map.magnitude = RealMatrix(range_bins_, static_cast<std::size_t>(sum_.rows()));
    const double scale = count_ > 0 ? 1.0 / static_cast<double>(count_) : 0.0;
    for (std::size_t k = 0; k < range_bins_; ++k)
      for (std::size_t b = 0; b < map.angle_bins(); ++b)
        map.magnitude(k, b) = sum_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) * scale;
    map.range_resolution = config.range_resolution();
    map.rx_spacing = config.rx_spacing;
    map.chirps_used = count_;
    return map;
  }

 private:
  std::size_t rx_, range_bins_;
  CMatrix dft_;
  Eigen::MatrixXd sum_;
  std::size_t count_ = 0;
};

// Cell combiner: value = sum_r dft(angle_bin, r) * R[r][range_bin].
struct CellTaps {
  std::vector<std::size_t> range_bin;
  std::vector<cplx> taps;  // cells x rx
};

CellTaps make_taps(std::span<const Cell> cells, std::size_t rx, std::size_t angle_bins) {
  const auto dft = angle_dft(rx, angle_bins);
  CellTaps t;
  for (const auto& c : cells) {
    require(c.angle_bin < angle_bins, ErrorKind::Parameter, "cell angle bin outside the angle grid");
    t.range_bin.push_back(c.range_bin);
    for (std::size_t r = 0; r < rx; ++r)
      t.taps.push_back(dft(static_cast<Eigen::Index>(c.angle_bin), static_cast<Eigen::Index>(r)));
  }
  return t;
}

}  // namespace

void range_fft_chirp(std::span<const cplx> chirp, std::size_t rx, std::size_t samples, std::span<cplx> out) {
  require(samples >= 8, ErrorKind::Parameter, "range FFT needs at least 8 fast-time samples");
  require(chirp.size() == rx * samples && out.size() == rx * samples, ErrorKind::ShapeMismatch,
          "range FFT buffers do not match rx x samples");
  const auto& w = range_window(samples);
  std::vector<cplx> buf(samples);
  for (std::size_t r = 0; r < rx; ++r) {
    for (std::size_t n = 0; n < samples; ++n) buf[n] = chirp[r * samples + n] * w[n];
    fft::forward(buf, out.subspan(r * samples, samples));
  }
}

RangeSpectrum range_fft(const synth::RadarCube& cube) {
  const auto& cfg = cube.config();
  RangeSpectrum s;
  s.frames = cube.frames();
  s.chirps = cfg.chirps_per_frame;
  s.rx = cfg.rx_antennas;
  s.bins = cfg.samples_per_chirp;
  s.config = cfg;
  s.data.resize(cube.samples().size());
  const std::size_t per_chirp = cube.chirp_size();
  for (std::size_t c = 0; c < cube.slow_time_samples(); ++c)
    range_fft_chirp(std::span<const cplx>(cube.samples()).subspan(c * per_chirp, per_chirp), s.rx, s.bins,
                    std::span<cplx>(s.data).subspan(c * per_chirp, per_chirp));
  return s;
}

double RangeAngleMap::azimuth_of(std::size_t bin) const {
  if (angle_bins() <= 1) return 0.0;
  const double u = (static_cast<double>(bin) - static_cast<double>(angle_bins() / 2)) / static_cast<double>(angle_bins());
  const double s = 2.0 * u / rx_spacing;
  return std::abs(s) <= 1.0 ? std::asin(s) : std::numeric_limits<double>::quiet_NaN();
}

double RangeAngleMap::angle_resolution_deg() const {
  if (angle_bins() <= 1) return 180.0;
  return std::asin(std::min(1.0, 2.0 / (rx_spacing * static_cast<double>(angle_bins())))) * 180.0 / kPi;
}

RangeAngleMap range_angle_map(const RangeSpectrum& spectrum, std::size_t angle_bins) {
  MapAccumulator acc(spectrum.rx, spectrum.bins, effective_angle_bins(spectrum.rx, angle_bins));
  const std::size_t per_chirp = spectrum.rx * spectrum.bins;
  for (std::size_t c = 0; c < spectrum.slow_time_samples(); ++c)
    acc.add(std::span<const cplx>(spectrum.data).subspan(c * per_chirp, per_chirp));
  return acc.finish(spectrum.config);
}

RangeAngleMap range_angle_map(const synth::CubeSource& source, std::size_t chirp_stride, std::size_t angle_bins) {
  require(chirp_stride >= 1, ErrorKind::Parameter, "chirp stride must be >= 1");
  const auto& cfg = source.config();
  MapAccumulator acc(cfg.rx_antennas, cfg.samples_per_chirp, effective_angle_bins(cfg.rx_antennas, angle_bins));
  std::vector<cplx> chirp(source.chirp_size()), spec(source.chirp_size());
  for (std::size_t c = 0; c < source.slow_time_samples(); c += chirp_stride) {
    source.read_chirp(c, chirp);
    range_fft_chirp(chirp, cfg.rx_antennas, cfg.samples_per_chirp, spec);
    acc.add(spec);
  }
  return acc.finish(cfg);
}

double phase_kurtosis(std::span<const double> phase) {
  require(phase.size() >= 4, ErrorKind::InsufficientData, "kurtosis needs at least 4 samples");
  const double mu = stats::mean(phase);
  double m2 = 0.0, m4 = 0.0;
  for (double v : phase) {
    const double d = (v - mu) * (v - mu);
    m2 += d;
    m4 += d * d;
  }
  m2 /= static_cast<double>(phase.size());
  m4 /= static_cast<double>(phase.size());
  require(m2 > 1e-300 && m2 > 1e-28 * (1.0 + mu * mu), ErrorKind::UndefinedStatistic,
          "kurtosis undefined for a series with zero variance");
  return m4 / (m2 * m2);
}

std::vector<Cell> candidate_cells(const RangeAngleMap& map, const SelectionParams& params) {
  const std::size_t nr = map.range_bins(), na = map.angle_bins();
  require(nr > 0 && na > 0, ErrorKind::EmptySelection, "empty range-angle map");
  const double floor =
      stats::median(map.magnitude.data) + params.floor_mads * stats::mad(map.magnitude.data);

  std::vector<Cell> peaks;
  for (std::size_t k = 0; k < nr; ++k)
    for (std::size_t b = 0; b < na; ++b) {
      const double v = map.magnitude(k, b);
      if (!(v > floor)) continue;
      bool is_max = true;
      for (int dk = -1; dk <= 1 && is_max; ++dk)
        for (int db = -1; db <= 1 && is_max; ++db) {
          if (dk == 0 && db == 0) continue;
          const long long kk = static_cast<long long>(k) + dk;
          if (kk < 0 || kk >= static_cast<long long>(nr)) continue;
          const std::size_t bb = (b + na + static_cast<std::size_t>(db + 1) - 1) % na;
          if (bb == b) continue;
          const double u = map.magnitude(static_cast<std::size_t>(kk), bb);
          // Plateaus resolve to the first cell in scan order.
          const bool earlier = static_cast<std::size_t>(kk) * na + bb < k * na + b;
          if (u > v || (u == v && earlier)) is_max = false;
        }
      if (is_max) peaks.push_back({k, b, v});
    }

  std::sort(peaks.begin(), peaks.end(), [](const Cell& a, const Cell& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    if (a.range_bin != b.range_bin) return a.range_bin < b.range_bin;
    return a.angle_bin < b.angle_bin;
  });

  std::vector<Cell> kept;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const auto& c = peaks[i];
    bool sidelobe = false;
    for (std::size_t j = 0; j < i && !sidelobe; ++j) {
      const auto& s = peaks[j];
      const auto dr = static_cast<std::size_t>(std::abs(static_cast<long long>(s.range_bin) - static_cast<long long>(c.range_bin)));
      if (dr <= 1 && c.magnitude < params.neighbor_ratio * s.magnitude) sidelobe = true;
      if (s.angle_bin == c.angle_bin && dr <= params.column_span && c.magnitude < params.column_ratio * s.magnitude)
        sidelobe = true;
    }
    if (!sidelobe) kept.push_back(c);
    if (kept.size() >= params.max_candidates) break;
  }
  return kept;
}

std::vector<ComplexSeries> extract_cell_series(const synth::CubeSource& source, std::span<const Cell> cells,
                                               std::size_t angle_bins) {
  const auto& cfg = source.config();
  const std::size_t rx = cfg.rx_antennas, n = cfg.samples_per_chirp;
  const auto taps = make_taps(cells, rx, effective_angle_bins(rx, angle_bins));
  const std::size_t samples = source.slow_time_samples();
  std::vector<ComplexSeries> out(cells.size(), ComplexSeries(samples));
  std::vector<cplx> chirp(source.chirp_size()), spec(source.chirp_size());
  for (std::size_t s = 0; s < samples; ++s) {
    source.read_chirp(s, chirp);
    range_fft_chirp(chirp, rx, n, spec);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      cplx v = 0.0;
      for (std::size_t r = 0; r < rx; ++r) v += taps.taps[i * rx + r] * spec[r * n + taps.range_bin[i]];
      out[i][s] = v;
    }
  }
  return out;
}

std::vector<ComplexSeries> extract_cell_series(const RangeSpectrum& spectrum, std::span<const Cell> cells,
                                               std::size_t angle_bins) {
  const auto taps = make_taps(cells, spectrum.rx, effective_angle_bins(spectrum.rx, angle_bins));
  const std::size_t samples = spectrum.slow_time_samples();
  std::vector<ComplexSeries> out(cells.size(), ComplexSeries(samples));
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t f = s / spectrum.chirps, c = s % spectrum.chirps;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      cplx v = 0.0;
      for (std::size_t r = 0; r < spectrum.rx; ++r) v += taps.taps[i * spectrum.rx + r] * spectrum.at(f, c, r, taps.range_bin[i]);
      out[i][s] = v;
    }
  }
  return out;
}

std::vector<TargetCandidate> rank_targets(std::vector<TargetCandidate> candidates, const RangeAngleMap& map,
                                          double sample_rate, const SelectionParams& params) {
  require(params.targets >= 1, ErrorKind::Parameter, "M must be >= 1");
  for (auto& c : candidates) {
    c.range = map.range_of(c.range_bin);
    c.azimuth = map.azimuth_of(c.angle_bin);
    c.phase_series = stats::unwrap(stats::angles(c.iq));
    const bool filter = params.band_limit && sample_rate > 2.0 * params.band_hi && c.phase_series.size() >= 16;
    const RealSeries scored =
        filter ? amplify::bandpass_filter(c.phase_series, params.band_lo, params.band_hi, sample_rate) : c.phase_series;
    try {
      c.kurtosis = phase_kurtosis(scored);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedStatistic) throw;
      c.kurtosis = std::numeric_limits<double>::quiet_NaN();
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const TargetCandidate& a, const TargetCandidate& b) {
    const bool an = std::isnan(a.kurtosis), bn = std::isnan(b.kurtosis);
    if (an != bn) return bn;
    if (!an && a.kurtosis != b.kurtosis) return a.kurtosis > b.kurtosis;
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return a.range_bin < b.range_bin;
  });
  if (candidates.size() > params.targets) candidates.resize(params.targets);
  return candidates;
}

namespace {

template <typename Source>
std::vector<TargetCandidate> select_from(const RangeAngleMap& map, const Source& source, double rate,
                                         const SelectionParams& params) {
  require(params.targets >= 1, ErrorKind::Parameter, "M must be >= 1");
  const auto cells = candidate_cells(map, params);
  require(!cells.empty(), ErrorKind::EmptySelection, "no range-angle cell rises above the noise floor");
  auto series = extract_cell_series(source, cells, map.angle_bins());
  std::vector<TargetCandidate> candidates(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    candidates[i].range_bin = cells[i].range_bin;
    candidates[i].angle_bin = cells[i].angle_bin;
    candidates[i].magnitude = cells[i].magnitude;
    candidates[i].iq = std::move(series[i]);
  }
  return rank_targets(std::move(candidates), map, rate, params);
}

}  // namespace

std::vector<TargetCandidate> select_targets(const RangeAngleMap& map, const RangeSpectrum& spectrum,
                                            const SelectionParams& params) {
  return select_from(map, spectrum, spectrum.config.slow_time_rate(), params);
}

std::vector<TargetCandidate> select_targets(const RangeAngleMap& map, const synth::CubeSource& source,
                                            const SelectionParams& params) {
  return select_from(map, source, source.config().slow_time_rate(), params);
}

void write_range_angle_csv(const std::filesystem::path& path, const RangeAngleMap& map) {
  io::CsvWriter csv(path);
  csv.header({"range_bin", "range_m", "angle_bin", "azimuth_deg", "magnitude"});
  for (std::size_t k = 0; k < map.range_bins(); ++k)
    for (std::size_t b = 0; b < map.angle_bins(); ++b) {
      csv.cell(k).cell(map.range_of(k)).cell(b).cell(map.azimuth_of(b) * 180.0 / kPi).cell(map.magnitude(k, b));
      csv.end_row();
    }
}

void write_target_report(const std::filesystem::path& path, std::span<const TargetCandidate> targets) {
  io::CsvWriter csv(path);
  csv.header({"rank", "range_bin", "angle_bin", "range_m", "azimuth_deg", "magnitude", "kurtosis"});
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    csv.cell(i).cell(t.range_bin).cell(t.angle_bin).cell(t.range).cell(t.azimuth * 180.0 / kPi).cell(t.magnitude).cell(t.kurtosis);
    csv.end_row();
  }
}

}  // namespace mmvib::radarcube
