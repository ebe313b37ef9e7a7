#include "mmvib/synth/synthesizer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mmvib/amplify/filters.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/io.hpp"
#include "mmvib/core/rng.hpp"
#include "mmvib/synth/acoustics.hpp"

namespace mmvib::synth {

void CubeSource::read_frame(std::size_t frame, std::span<cplx> out) const {
  require(out.size() == frame_size(), ErrorKind::ShapeMismatch, "frame buffer has the wrong size");
  const std::size_t per_chirp = chirp_size();
  const std::size_t chirps = config().chirps_per_frame;
  for (std::size_t c = 0; c < chirps; ++c) read_chirp(frame * chirps + c, out.subspan(c * per_chirp, per_chirp));
}

RadarCube::RadarCube(RadarConfig config, std::size_t frames)
    : config_(std::move(config)),
      frames_(frames),
      samples_(frames * config_.chirps_per_frame * config_.rx_antennas * config_.samples_per_chirp) {}

void RadarCube::read_chirp(std::size_t chirp, std::span<cplx> out) const {
  require(chirp < slow_time_samples(), ErrorKind::Parameter, "chirp index out of range");
  require(out.size() == chirp_size(), ErrorKind::ShapeMismatch, "chirp buffer has the wrong size");
  std::copy_n(samples_.begin() + static_cast<std::ptrdiff_t>(chirp * chirp_size()), chirp_size(), out.begin());
}

std::vector<int> GroundTruth::segment_index() const {
  std::vector<int> idx(samples, -1);
  for (std::size_t k = 0; k < segments.size(); ++k)
    for (std::size_t s = segments[k].samples.begin; s < std::min(segments[k].samples.end, samples); ++s)
      idx[s] = static_cast<int>(k);
  return idx;
}

namespace {

std::size_t angle_bin_of(double azimuth, double spacing, std::size_t bins) {
  const double u = spacing * std::sin(azimuth) / 2.0;  // cycles per element
  const auto b = static_cast<long long>(std::llround(u * static_cast<double>(bins))) + static_cast<long long>(bins / 2);
  const auto n = static_cast<long long>(bins);
  return static_cast<std::size_t>(((b % n) + n) % n);
}

// Speech truth segments: union of all speakers' intervals, each tagged with
// its speaker. Overlapping talk is merged into the earlier speaker's segment.
std::vector<SpeechSegmentTruth> collect_segments(const Scene& scene, double rate, std::size_t samples) {
  std::vector<SpeechSegmentTruth> segs;
  for (std::size_t s = 0; s < scene.speakers.size(); ++s) {
    const auto& spk = scene.speakers[s];
    for (std::size_t i = 0; i < spk.active_intervals.size(); ++i) {
      SpeechSegmentTruth seg;
      seg.interval = spk.active_intervals[i];
      seg.speaker = static_cast<int>(s);
      seg.digit = i < spk.digits.size() ? spk.digits[i] : -1;
      seg.samples.begin = std::min(samples, static_cast<std::size_t>(std::ceil(seg.interval.start * rate)));
      seg.samples.end = std::min(samples, static_cast<std::size_t>(std::ceil(seg.interval.end * rate)));
      if (seg.samples.length() > 0) segs.push_back(seg);
    }
  }
  std::sort(segs.begin(), segs.end(), [](const auto& a, const auto& b) { return a.samples.begin < b.samples.begin; });
  std::vector<SpeechSegmentTruth> merged;
  for (const auto& s : segs) {
    if (!merged.empty() && s.samples.begin < merged.back().samples.end) {
      merged.back().samples.end = std::max(merged.back().samples.end, s.samples.end);
      merged.back().interval.end = std::max(merged.back().interval.end, s.interval.end);
      continue;
    }
    merged.push_back(s);
  }
  return merged;
}

}  // namespace

SceneSynthesizer::SceneSynthesizer(Scene scene, RadarConfig config, std::uint64_t seed, GroundTruthOptions options)
    : scene_(std::move(scene)), config_(std::move(config)), seed_(seed) {
  scene_.validate();
  config_.validate();
  const double rate = config_.slow_time_rate();
  frames_ = static_cast<std::size_t>(std::ceil(scene_.duration / config_.frame_duration - 1e-9));
  require(frames_ >= 1, ErrorKind::Configuration, "scene shorter than one frame");
  const std::size_t samples = frames_ * config_.chirps_per_frame;

  truth_.sample_rate = rate;
  truth_.samples = samples;
  truth_.options = options;
  for (const auto& s : scene_.speakers) truth_.labels.push_back(s.label);
  truth_.segments = collect_segments(scene_, rate, samples);
  blend_static_shifts(rate);

  const std::size_t n_fast = config_.samples_per_chirp;
  const std::size_t n_rx = config_.rx_antennas;
  const auto window = amplify::hann_window(n_fast);
  double window_energy = 0.0;
  for (double w : window) window_energy += w * w;
  const double k_vib = 4.0 * kPi * config_.start_frequency / config_.c;

  for (std::size_t o = 0; o < scene_.objects.size(); ++o) {
    const auto& obj = scene_.objects[o];
    const Bearing b = bearing_of(scene_.radar_pose, obj.position);
    require(b.range > 0.0 && b.range < config_.max_range(), ErrorKind::Configuration,
            "object " + obj.name + " at " + io::format_double(b.range) + " m is beyond the unambiguous range " +
                io::format_double(config_.max_range()) + " m");

    ObjectTruth t;
    t.name = obj.name;
    t.range = b.range;
    t.azimuth = b.azimuth;
    t.range_bin = static_cast<std::size_t>(std::llround(b.range / config_.range_resolution()));
    t.angle_bin = angle_bin_of(b.azimuth, config_.rx_spacing, n_rx >= 2 ? kDefaultAngleBins : 1);
    t.amplitude = obj.static_reflectivity / std::pow(b.range, config_.path_loss_exponent);

    t.displacement.assign(samples, 0.0);
    for (const auto& spk : scene_.speakers) {
      const auto d = displacement_series(obj, spk, rate, samples);
      for (std::size_t s = 0; s < samples; ++s) t.displacement[s] += d[s];
    }
    t.vibration_phase.resize(samples);
    for (std::size_t s = 0; s < samples; ++s) t.vibration_phase[s] = k_vib * t.displacement[s];

    Rng drift_rng(derive_seed(seed_, "hardware-drift", o));
    const double drift_rate = scene_.hardware.phase_drift * (1.0 + scene_.hardware.drift_rate_jitter * drift_rng.normal());
    const double drift_start = drift_rng.uniform(0.0, kTwoPi);
    t.hardware_phase.resize(samples);
    for (std::size_t s = 0; s < samples; ++s) t.hardware_phase[s] = drift_start + drift_rate * static_cast<double>(s) / rate;

    Rng static_rng(derive_seed(seed_, "static-interference", o));
    t.static_silence = std::polar(obj.static_interference_ratio * t.amplitude, static_rng.uniform(0.0, kTwoPi));
    for (std::size_t k = 0; k < truth_.segments.size(); ++k)
      t.static_speech.push_back(t.static_silence * (1.0 + std::polar(obj.static_shift_gain, static_rng.uniform(0.0, kTwoPi))));

    // IF kernel: beat tone at f_IF = 2 K R0 / c across fast time, far-field
    // steering across the array.
    const double beat = 2.0 * config_.chirp_slope * b.range / config_.c / config_.fast_time_rate();  // cycles per sample
    const double steer = kPi * config_.rx_spacing * std::sin(b.azimuth);
    std::vector<cplx> kernel(n_rx * n_fast);
    for (std::size_t r = 0; r < n_rx; ++r)
      for (std::size_t n = 0; n < n_fast; ++n)
        kernel[r * n_fast + n] = std::polar(1.0, kTwoPi * beat * static_cast<double>(n) + steer * static_cast<double>(r));
    kernels_.push_back(std::move(kernel));
    carrier_phase_.push_back(std::fmod(k_vib * b.range, kTwoPi));

    // Gain of the range-FFT / angle-FFT cell the object lands in.
    cplx g_range = 0.0, g_angle = 0.0;
    for (std::size_t n = 0; n < n_fast; ++n)
      g_range += window[n] * std::polar(1.0, kTwoPi * (beat - static_cast<double>(t.range_bin) / static_cast<double>(n_fast)) *
                                                 static_cast<double>(n));
    const double grid = n_rx >= 2 ? static_cast<double>(kDefaultAngleBins) : 1.0;
    const double angle_shift = n_rx >= 2 ? static_cast<double>(t.angle_bin) - grid / 2.0 : 0.0;
    for (std::size_t r = 0; r < n_rx; ++r)
      g_angle += std::polar(1.0, (steer - kTwoPi * angle_shift / grid) * static_cast<double>(r));
    t.cell_gain = g_range * g_angle;
    const double noise_power = config_.self_noise_std * config_.self_noise_std * window_energy * static_cast<double>(n_rx);
    const double signal = t.amplitude * std::abs(t.cell_gain);
    t.cell_phase_noise_std = signal > 0.0 ? std::sqrt(noise_power / 2.0) / signal : 0.0;

    if (options.compute_spectra && samples >= options.stft.window) {
      const auto bp = amplify::bandpass_filter(t.vibration_phase, options.band_lo, options.band_hi, rate);
      t.clean_stft = amplify::stft(bp, rate, options.stft);
      const auto filter = amplify::butterworth_bandpass(options.band_lo, options.band_hi, rate);
      const auto stft_window = amplify::hann_window(options.stft.window);
      double stft_energy = 0.0;
      for (double w : stft_window) stft_energy += w * w;
      const std::size_t frames = t.clean_stft.frames(), bins = t.clean_stft.bins();
      std::vector<double> noise_psd(bins);
      for (std::size_t k = 0; k < bins; ++k) {
        const double h = std::abs(filter.response(t.clean_stft.bin_hz(k)));
        noise_psd[k] = t.cell_phase_noise_std * t.cell_phase_noise_std * h * h * h * h * stft_energy;
      }
      t.speech_mask = RealMatrix(frames, bins);
      t.noise_mask = RealMatrix(frames, bins);
      for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t k = 0; k < bins; ++k) {
          const double p = std::norm(t.clean_stft.values(f, k));
          const double m = p + noise_psd[k] > 0.0 ? p / (p + noise_psd[k]) : 0.0;
          t.speech_mask(f, k) = m;
          t.noise_mask(f, k) = 1.0 - m;
        }
    }
    truth_.objects.push_back(std::move(t));
  }
}

void SceneSynthesizer::blend_static_shifts(double rate) {
  static_segment_.assign(truth_.samples, -1);
  static_weight_.assign(truth_.samples, 0.0);
  const double ramp = scene_.static_transition;
  for (std::size_t k = 0; k < truth_.segments.size(); ++k) {
    const auto& iv = truth_.segments[k].interval;
    const double lo = iv.start - ramp / 2.0, hi = iv.end + ramp / 2.0;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(lo * rate)));
    const auto last = std::min(truth_.samples, static_cast<std::size_t>(std::max(0.0, std::ceil(hi * rate))));
    for (std::size_t s = first; s < last; ++s) {
      const double t = static_cast<double>(s) / rate;
      double w = 1.0;
      if (ramp > 0.0) {
        const double edge = std::min(t - lo, hi - t) / ramp;  // 0 at the window edge, 1 a full ramp inside
        if (edge < 1.0) w = 0.5 - 0.5 * std::cos(kPi * std::max(edge, 0.0));
      } else if (!iv.contains(t)) {
        w = 0.0;
      }
      if (w > static_weight_[s]) {
        static_weight_[s] = w;
        static_segment_[s] = static_cast<int>(k);
      }
    }
  }
}

cplx SceneSynthesizer::object_phasor(std::size_t o, std::size_t s) const {
  const auto& t = truth_.objects[o];
  const cplx vib = std::polar(t.amplitude, carrier_phase_[o] + t.vibration_phase[s] + t.hardware_phase[s]);
  const int seg = static_segment_[s];
  if (seg < 0) return vib + t.static_silence;
  return vib + t.static_silence + static_weight_[s] * (t.static_speech[static_cast<std::size_t>(seg)] - t.static_silence);
}

void SceneSynthesizer::read_chirp(std::size_t chirp, std::span<cplx> out) const {
  require(chirp < slow_time_samples(), ErrorKind::Parameter, "chirp index out of range");
  require(out.size() == chirp_size(), ErrorKind::ShapeMismatch, "chirp buffer has the wrong size");
  const double sigma = config_.self_noise_std;
  if (sigma > 0.0) {
    Rng rng(derive_seed(seed_, "self-noise", chirp));
    for (auto& v : out) v = rng.complex_normal(sigma);
  } else {
    std::fill(out.begin(), out.end(), cplx(0.0));
  }
  for (std::size_t o = 0; o < kernels_.size(); ++o) {
    const cplx z = object_phasor(o, chirp);
    const double zr = z.real(), zi = z.imag();
    const auto& k = kernels_[o];
    // Spelled out: std::complex operator* carries inf/nan recovery that blocks vectorization.
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double kr = k[i].real(), ki = k[i].imag();
      out[i] += cplx(zr * kr - zi * ki, zr * ki + zi * kr);
    }
  }
}

RadarCube SceneSynthesizer::materialize() const {
  RadarCube cube(config_, frames_);
  for (std::size_t f = 0; f < frames_; ++f) read_frame(f, cube.frame_span(f));
  return cube;
}

SynthesisResult synthesize_radar_cube(const Scene& scene, const RadarConfig& config, std::uint64_t seed,
                                      const GroundTruthOptions& options) {
  SceneSynthesizer synth(scene, config, seed, options);
  return {synth.materialize(), synth.truth()};
}

void export_ground_truth(const GroundTruth& truth, const std::string& directory, bool include_csv_series) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  fs::create_directories(dir);
  const std::size_t n_obj = truth.objects.size();

  std::vector<double> disp, vib, hw;
  for (const auto& o : truth.objects) {
    disp.insert(disp.end(), o.displacement.begin(), o.displacement.end());
    vib.insert(vib.end(), o.vibration_phase.begin(), o.vibration_phase.end());
    hw.insert(hw.end(), o.hardware_phase.begin(), o.hardware_phase.end());
  }
  const std::vector<std::uint64_t> series_dims = {n_obj, truth.samples};
  io::write_tensor(dir / "displacement.bin", series_dims, disp);
  io::write_tensor(dir / "vibration_phase.bin", series_dims, vib);
  io::write_tensor(dir / "hardware_phase.bin", series_dims, hw);

  if (n_obj > 0 && truth.objects.front().speech_mask.rows > 0) {
    const auto& first = truth.objects.front();
    std::vector<double> mask;
    std::vector<cplx> spec;
    for (const auto& o : truth.objects) {
      mask.insert(mask.end(), o.speech_mask.data.begin(), o.speech_mask.data.end());
      spec.insert(spec.end(), o.clean_stft.values.data.begin(), o.clean_stft.values.data.end());
    }
    const std::vector<std::uint64_t> tf_dims = {n_obj, first.speech_mask.rows, first.speech_mask.cols};
    io::write_tensor(dir / "speech_mask.bin", tf_dims, mask);
    io::write_complex_tensor(dir / "clean_stft.bin", tf_dims, spec);
  }

  io::CsvWriter objects(dir / "objects.csv");
  objects.header({"object", "range_m", "azimuth_deg", "range_bin", "angle_bin", "amplitude", "static_re", "static_im",
                  "cell_phase_noise_std_rad"});
  for (const auto& o : truth.objects) {
    objects.cell(o.name).cell(o.range).cell(o.azimuth * 180.0 / kPi).cell(o.range_bin).cell(o.angle_bin);
    objects.cell(o.amplitude).cell(o.static_silence.real()).cell(o.static_silence.imag()).cell(o.cell_phase_noise_std);
    objects.end_row();
  }

  io::CsvWriter segs(dir / "segments.csv");
  segs.header({"segment", "speaker", "digit", "start_s", "end_s", "start_sample", "end_sample"});
  for (std::size_t k = 0; k < truth.segments.size(); ++k) {
    const auto& s = truth.segments[k];
    segs.cell(k).cell(s.speaker >= 0 ? truth.labels[static_cast<std::size_t>(s.speaker)] : std::string("?"));
    segs.cell(s.digit).cell(s.interval.start).cell(s.interval.end).cell(s.samples.begin).cell(s.samples.end);
    segs.end_row();
  }

  io::CsvWriter shifts(dir / "static_speech.csv");
  shifts.header({"object", "segment", "re", "im"});
  for (const auto& o : truth.objects)
    for (std::size_t k = 0; k < o.static_speech.size(); ++k) {
      shifts.cell(o.name).cell(k).cell(o.static_speech[k].real()).cell(o.static_speech[k].imag());
      shifts.end_row();
    }

  if (include_csv_series) {
    io::CsvWriter series(dir / "displacement.csv");
    std::vector<std::string> cols = {"sample", "t_s"};
    for (const auto& o : truth.objects) cols.push_back(o.name + "_m");
    series.header(cols);
    for (std::size_t s = 0; s < truth.samples; ++s) {
      series.cell(s).cell(static_cast<double>(s) / truth.sample_rate);
      for (const auto& o : truth.objects) series.cell(o.displacement[s]);
      series.end_row();
    }
  }
}

}  // namespace mmvib::synth
