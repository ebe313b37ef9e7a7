#include "mmvib/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include "mmvib/amplify/filters.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/io.hpp"
#include "mmvib/core/rng.hpp"

namespace mmvib::pipeline {
namespace {

constexpr std::size_t kCircleDumpStride = 16;
constexpr std::size_t kPngColumns = 1500;  // time axis is max-pooled down to this width
constexpr std::size_t kMaxCellDistance = 2; // bins between a target and the object it is matched to

// Re-throws with the stage (and target) prefixed, keeping the error kind.
template <class F>
auto staged(Stage stage, int target, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string where = std::string("stage '") + to_string(stage) + "'";
    if (target >= 0) where += " target " + std::to_string(target);
    throw Error(e.kind(), where + ": " + e.what());
  }
}

synth::Scene make_scene(const ExperimentConfig& c) {
  auto scene = synth::build_layout_scene(c.scene.layout, c.radar.slow_time_rate(), derive_seed(c.seed, "scene"));
  for (auto& o : scene.objects) {
    if (o.rigid) continue;
    o.static_shift_gain = c.scene.static_shift_gain;
    o.static_interference_ratio = c.scene.static_interference_ratio;
  }
  scene.hardware.phase_drift = c.scene.phase_drift;
  return scene;
}

int match_object(const radarcube::TargetCandidate& t, const synth::GroundTruth& truth) {
  int best = -1;
  std::size_t best_d = kMaxCellDistance + 1;
  for (std::size_t o = 0; o < truth.objects.size(); ++o) {
    const auto& obj = truth.objects[o];
    const auto dr = static_cast<std::size_t>(std::abs(static_cast<long>(obj.range_bin) - static_cast<long>(t.range_bin)));
    const auto da_raw =
        static_cast<std::size_t>(std::abs(static_cast<long>(obj.angle_bin) - static_cast<long>(t.angle_bin)));
    const std::size_t da = std::min(da_raw, synth::kDefaultAngleBins - da_raw);
    if (dr + da < best_d) {
      best_d = dr + da;
      best = static_cast<int>(o);
    }
  }
  return best;
}

std::vector<IndexInterval> union_segments(const std::vector<TargetTrace>& targets) {
  std::vector<IndexInterval> all;
  for (const auto& t : targets) all.insert(all.end(), t.speech.intervals.begin(), t.speech.intervals.end());
  std::sort(all.begin(), all.end(), [](auto a, auto b) { return a.begin < b.begin; });
  std::vector<IndexInterval> out;
  for (const auto& iv : all) {
    if (!out.empty() && iv.begin <= out.back().end)
      out.back().end = std::max(out.back().end, iv.end);
    else
      out.push_back(iv);
  }
  return out;
}

// Frames whose window center lies inside the interval; at least the nearest one.
IndexInterval frames_of(const IndexInterval& iv, const amplify::STFTMatrix& s) {
  const std::size_t half = s.params.window / 2, hop = s.params.hop;
  const std::size_t first = iv.begin <= half ? 0 : (iv.begin - half + hop - 1) / hop;
  const std::size_t last = iv.end <= half ? 0 : (iv.end - half + hop - 1) / hop;  // exclusive
  IndexInterval f{std::min(first, s.frames() - 1), std::min(last, s.frames())};
  if (f.length() == 0) f.end = f.begin + 1;
  return f;
}

// Leading frames whose windows do not touch any speech segment.
std::vector<std::size_t> silent_frames(const amplify::STFTMatrix& s, std::span<const IndexInterval> speech,
                                       std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < s.frames() && out.size() < count; ++t) {
    const std::size_t a = s.frame_start(t), b = a + s.params.window;
    bool clear = true;
    for (const auto& iv : speech)
      if (a < iv.end && iv.begin < b) {
        clear = false;
        break;
      }
    if (clear) out.push_back(t);
  }
  return out;
}

RealMatrix magnitude_of(const amplify::STFTMatrix& s) {
  RealMatrix m(s.frames(), s.bins());
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = std::abs(s.values.data[i]);
  return m;
}

// Frequency on the vertical axis (low at the bottom), time max-pooled horizontally.
RealMatrix heatmap_of(const RealMatrix& frames_by_bins) {
  const std::size_t frames = frames_by_bins.rows, bins = frames_by_bins.cols;
  const std::size_t cols = std::max<std::size_t>(1, std::min(frames, kPngColumns));
  RealMatrix img(bins, cols, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t c = t * cols / std::max<std::size_t>(frames, 1);
    for (std::size_t k = 0; k < bins; ++k) img(bins - 1 - k, c) = std::max(img(bins - 1 - k, c), frames_by_bins(t, k));
  }
  return img;
}

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, bool enabled, std::vector<std::filesystem::path>& list)
      : dir_(std::move(dir)), enabled_(enabled), list_(list) {
    if (enabled_) std::filesystem::create_directories(dir_);
  }
  bool enabled() const { return enabled_; }
  std::filesystem::path add(const std::filesystem::path& rel) {
    list_.push_back(rel);
    return dir_ / rel;
  }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  bool enabled_;
  std::vector<std::filesystem::path>& list_;
};

void write_segments_csv(const std::filesystem::path& path, const PipelineResult& r) {
  io::CsvWriter csv(path);
  csv.header({"source", "segment", "begin_sample", "end_sample", "label"});
  for (std::size_t t = 0; t < r.targets.size(); ++t)
    for (std::size_t i = 0; i < r.targets[t].speech.intervals.size(); ++i) {
      const auto& iv = r.targets[t].speech.intervals[i];
      csv.cell("target" + std::to_string(t)).cell(i).cell(iv.begin).cell(iv.end).cell(-1);
      csv.end_row();
    }
  for (std::size_t i = 0; i < r.segments.size(); ++i) {
    csv.cell("union").cell(i).cell(r.segments[i].begin).cell(r.segments[i].end);
    csv.cell(i < r.segment_labels.size() ? r.segment_labels[i] : -1);
    csv.end_row();
  }
}

void write_manifest(const ArtifactWriter& w, const std::vector<std::filesystem::path>& files) {
  std::ofstream out(w.dir() / "manifest.txt", std::ios::binary);
  for (const auto& f : files) out << f.generic_string() << ' ' << std::filesystem::file_size(w.dir() / f) << '\n';
  require(out.good(), ErrorKind::Io, "cannot write manifest in " + w.dir().string());
}

}  // namespace

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Simulate: return "simulate";
    case Stage::Detect: return "detect";
    case Stage::Calibrate: return "calibrate";
    case Stage::Amplify: return "amplify";
    case Stage::Cluster: return "cluster";
    case Stage::Enhance: return "enhance";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (auto s : {Stage::Simulate, Stage::Detect, Stage::Calibrate, Stage::Amplify, Stage::Cluster, Stage::Enhance,
                 Stage::Evaluate})
    if (name == to_string(s)) return s;
  fail(ErrorKind::Parameter, "unknown stage '" + name + "'");
}

std::vector<int> utterance_predictions(const synth::GroundTruth& truth, std::span<const IndexInterval> segments,
                                       std::span<const int> segment_labels) {
  require(segments.size() == segment_labels.size(), ErrorKind::ShapeMismatch, "one label per segment required");
  std::vector<int> out;
  for (const auto& u : truth.segments) {
    std::size_t best_overlap = 0;
    int label = -1;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const std::size_t lo = std::max(u.samples.begin, segments[i].begin);
      const std::size_t hi = std::min(u.samples.end, segments[i].end);
      if (hi > lo && hi - lo > best_overlap) {
        best_overlap = hi - lo;
        label = segment_labels[i];
      }
    }
    out.push_back(label);
  }
  return out;
}

PipelineResult run_pipeline(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto& p = config.pipeline;
  const std::filesystem::path dir =
      config.output_dir.is_absolute() ? config.output_dir : output_root() / config.output_dir;
  PipelineResult r;
  ArtifactWriter out(dir, options.write_artifacts, r.artifacts);

  // Simulate.
  synth::GroundTruthOptions gto;
  gto.stft = p.stft;
  gto.band_lo = p.band_lo;
  gto.band_hi = p.band_hi;
  std::unique_ptr<synth::SceneSynthesizer> source = staged(Stage::Simulate, -1, [&] {
    r.scene = make_scene(config);
    return std::make_unique<synth::SceneSynthesizer>(r.scene, config.radar, derive_seed(config.seed, "radar"), gto);
  });
  r.truth = source->truth();
  const double rate = r.truth.sample_rate;
  if (out.enabled()) {
    {
      std::ofstream cfg(out.add("config.json"), std::ios::binary);
      cfg << to_json(config);
    }
    if (options.export_truth) {
      synth::export_ground_truth(r.truth, (dir / "truth").string(), false);
      for (const auto& e : std::filesystem::directory_iterator(dir / "truth"))
        r.artifacts.push_back(std::filesystem::path("truth") / e.path().filename());
    }
    io::CsvWriter csv(out.add("truth_segments.csv"));
    csv.header({"utterance", "speaker", "digit", "start_s", "end_s", "begin_sample", "end_sample"});
    for (std::size_t i = 0; i < r.truth.segments.size(); ++i) {
      const auto& s = r.truth.segments[i];
      csv.cell(i).cell(s.speaker).cell(s.digit).cell(s.interval.start).cell(s.interval.end).cell(s.samples.begin).cell(
          s.samples.end);
      csv.end_row();
    }
  }
  auto finish = [&](Stage s) {
    r.completed = s;
    if (out.enabled()) write_manifest(out, r.artifacts);
    return s == options.stop_after;
  };
  if (finish(Stage::Simulate)) return r;

  // Detect.
  staged(Stage::Detect, -1, [&] {
    r.map = radarcube::range_angle_map(*source, p.map_chirp_stride);
    radarcube::SelectionParams sel;
    sel.targets = p.targets;
    sel.band_lo = p.band_lo;
    sel.band_hi = p.band_hi;
    auto targets = radarcube::select_targets(r.map, *source, sel);
    require(!targets.empty(), ErrorKind::EmptySelection, "no target cells above the noise floor");
    for (auto& t : targets) {
      TargetTrace trace;
      trace.truth_object = match_object(t, r.truth);
      trace.candidate = std::move(t);
      r.targets.push_back(std::move(trace));
    }
  });
  if (out.enabled()) {
    radarcube::write_range_angle_csv(out.add("range_angle.csv"), r.map);
    io::write_heatmap_png(out.add("range_angle.png"), r.map.magnitude, true);
    std::vector<radarcube::TargetCandidate> report;
    for (const auto& t : r.targets) {
      report.push_back(t.candidate);
      report.back().iq.clear();
      report.back().phase_series.clear();
    }
    radarcube::write_target_report(out.add("targets.csv"), report);
  }
  if (finish(Stage::Detect)) return r;

  // Calibrate.
  vibext::SadParams sad;
  sad.band_lo = p.band_lo;
  sad.band_hi = p.band_hi;
  vibext::CalibrationParams cal;
  cal.gamma = p.gamma;
  for (std::size_t i = 0; i < r.targets.size(); ++i) {
    auto& t = r.targets[i];
    staged(Stage::Calibrate, static_cast<int>(i), [&] {
      const vibext::IQSeries iq{t.candidate.iq, rate};
      t.speech = vibext::detect_speech_segments(iq, sad);
      t.phase = vibext::calibrate(iq, t.speech, cal, i);
      if (out.enabled())
        vibext::write_circle_dump(out.add("circle_fit_t" + std::to_string(i) + ".csv"), iq, t.phase, kCircleDumpStride);
    });
  }
  r.segments = union_segments(r.targets);
  if (finish(Stage::Calibrate)) return r;

  // Amplify.
  for (std::size_t i = 0; i < r.targets.size(); ++i) {
    auto& t = r.targets[i];
    staged(Stage::Amplify, static_cast<int>(i), [&] {
      const auto bp = amplify::bandpass_filter(t.phase.values, p.band_lo, p.band_hi, rate);
      t.bandpassed = amplify::stft(bp, rate, p.stft);
      const auto quiet = silent_frames(t.bandpassed, r.segments, p.noise_frames);
      t.noise = amplify::estimate_noise_profile(t.bandpassed, quiet, p.noise_frames);
      t.subtracted = amplify::spectral_subtract(t.bandpassed, t.noise, {p.alpha, p.beta});
      t.power = amplify::auto_power_spectrum(t.subtracted);
      if (out.enabled()) {
        const std::string stem = "spectrogram_t" + std::to_string(i);
        io::write_heatmap_png(out.add(stem + "_bandpass.png"), heatmap_of(magnitude_of(t.bandpassed)), true);
        io::write_heatmap_png(out.add(stem + "_subtracted.png"), heatmap_of(t.subtracted.magnitude), true);
        io::write_heatmap_png(out.add(stem + "_power.png"), heatmap_of(t.power.values), true);
      }
    });
  }
  if (finish(Stage::Amplify)) return r;

  // Cluster.
  staged(Stage::Cluster, -1, [&] {
    const auto& ref = r.targets.front().bandpassed;
    cluster::EnvelopeParams env;
    env.dimension = p.envelope_dim;
    const double bin_hz = ref.bin_hz(1);
    env.bin_lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(p.band_lo / bin_hz)));
    env.bin_hi = std::min(ref.bins() - 1, static_cast<std::size_t>(std::ceil(p.band_hi / bin_hz)));
    for (const auto& seg : r.segments) {
      const auto frames = frames_of(seg, ref);
      r.segment_frames.push_back(frames);
      std::vector<std::vector<double>> envs;
      for (const auto& t : r.targets) envs.push_back(cluster::spectral_envelope(t.power, frames, env));
      r.features.append(cluster::build_feature(envs));
    }
    const std::uint64_t seed = derive_seed(config.seed, "cluster");
    const std::size_t n = r.features.rows;
    if (p.speakers > 0) {
      require(n >= p.speakers, ErrorKind::InsufficientData, "fewer speech segments than the requested speaker count");
      r.clustering.speakers = p.speakers;
      r.clustering.clustering = cluster::gmm_cluster(r.features, p.speakers, seed);
      r.clustering.monotone = r.clustering.clustering.monotone;
    } else if (n >= 3) {
      r.clustering = cluster::estimate_num_speakers(r.features, std::min(p.max_speakers, n - 1), seed);
    } else {
      require(n >= 1, ErrorKind::EmptySelection, "no speech segments detected");
      r.clustering.speakers = 1;
      r.clustering.clustering = cluster::gmm_cluster(r.features, 1, seed);
      r.clustering.monotone = r.clustering.clustering.monotone;
    }
    r.segment_labels = r.clustering.clustering.labels;
    if (out.enabled()) {
      cluster::write_cluster_report(out.add("cluster.csv"), r.clustering.clustering);
      if (!r.clustering.candidates.empty()) cluster::write_ch_curve(out.add("ch_curve.csv"), r.clustering);
      write_segments_csv(out.add("segments.csv"), r);
    }
  });
  if (finish(Stage::Cluster)) return r;

  // Enhance.
  staged(Stage::Enhance, -1, [&] {
    enhance::MaskedSTFT input;
    std::vector<amplify::NoiseProfile> noise;
    std::vector<RealMatrix> oracle;
    for (const auto& t : r.targets) {
      input.stfts.push_back(t.bandpassed);
      noise.push_back(t.noise);
      if (p.mask_mode == enhance::MaskMode::Oracle) {
        require(t.truth_object >= 0, ErrorKind::Parameter,
                "oracle masks need every target matched to a simulated object");
        oracle.push_back(r.truth.objects[static_cast<std::size_t>(t.truth_object)].speech_mask);
      }
    }
    auto masks = enhance::estimate_masks(input.stfts, p.mask_mode,
                                         p.mask_mode == enhance::MaskMode::Oracle ? &oracle : nullptr, noise);
    input.speech_masks = std::move(masks.speech);
    input.noise_masks = std::move(masks.noise);
    std::vector<int> groups;
    if (p.per_speaker_steering) {
      groups.assign(input.stfts.front().frames(), -1);
      for (std::size_t s = 0; s < r.segment_frames.size(); ++s)
        for (std::size_t f = r.segment_frames[s].begin; f < r.segment_frames[s].end; ++f) groups[f] = r.segment_labels[s];
    }
    enhance::EnhanceOptions eo;
    eo.post_filter = amplify::SubtractionParams{p.alpha, p.beta};
    eo.noise_frames = silent_frames(input.stfts.front(), r.segments, p.noise_frames);
    r.enhancement = enhance::enhance(input, eo, groups);
    if (out.enabled()) {
      io::write_pcm16(out.add("enhanced.pcm"), r.enhancement.audio, rate);
      r.artifacts.push_back("enhanced.pcm.txt");
      io::write_heatmap_png(out.add("enhanced_spectrogram.png"), heatmap_of(magnitude_of(r.enhancement.spectrum)), true);
    }
  });
  if (finish(Stage::Enhance)) return r;

  // Evaluate.
  staged(Stage::Evaluate, -1, [&] {
    auto& rep = r.report;
    rep.seed = config.seed;
    rep.config_fingerprint = config.fingerprint();
    rep.speakers_true = r.truth.labels.size();
    rep.speakers_estimated = r.clustering.speakers;
    for (const auto& u : r.truth.segments) rep.truth.push_back(u.speaker);
    rep.predicted = utterance_predictions(r.truth, r.segments, r.segment_labels);
    rep.success_rate = metrics::success_rate(rep.predicted, rep.truth);

    const auto& lead = r.targets.front();
    require(lead.truth_object >= 0, ErrorKind::Parameter, "reference target does not match a simulated object");
    const auto& clean = r.truth.objects[static_cast<std::size_t>(lead.truth_object)].clean_stft;
    const auto reference = amplify::istft(clean);
    const auto baseline_spec = lead.subtracted.to_complex();
    const auto baseline = amplify::istft(baseline_spec);
    rep.snr_db = metrics::snr_db(r.enhancement.audio, reference, rate);
    rep.baseline_snr_db = metrics::snr_db(baseline, reference, rate);
    const auto clean_mag = magnitude_of(clean);
    rep.psnr_db = metrics::psnr_db(magnitude_of(r.enhancement.spectrum), clean_mag);
    rep.baseline_psnr_db = metrics::psnr_db(magnitude_of(baseline_spec), clean_mag);
    if (out.enabled()) {
      metrics::write_report_csv(out.add("metrics.csv"), rep);
      metrics::write_assignments_csv(out.add("assignments.csv"), rep);
    }
  });
  finish(Stage::Evaluate);
  return r;
}

}  // namespace mmvib::pipeline
