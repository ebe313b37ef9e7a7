#include "mmvib/pipeline/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmvib/core/error.hpp"
#include "mmvib/core/io.hpp"
#include "mmvib/core/rng.hpp"

namespace mmvib::pipeline {
namespace {

using nlohmann::json;

// Reads keys from one JSON object and reports any it did not consume.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    require(j.is_object(), ErrorKind::Configuration, "config section '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      require(used_.count(key) > 0, ErrorKind::Configuration, "unknown config key '" + name_ + "." + key + "'");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Configuration, "config key '" + name_ + "." + key + "': " + e.what());
    }
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& at(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

void read_scene(const json& j, SceneConfig& s) {
  Section sec(j, "scene");
  std::string arrangement = synth::to_string(s.layout.arrangement);
  sec.get("arrangement", arrangement);
  s.layout.arrangement = synth::parse_arrangement(arrangement);
  sec.get("speakers", s.layout.speakers);
  sec.get("objects", s.layout.objects);
  sec.get("utterances_per_speaker", s.layout.utterances_per_speaker);
  sec.get("distance_m", s.layout.distance);
  sec.get("include_wall", s.layout.include_wall);
  sec.get("leading_silence_s", s.layout.leading_silence);
  sec.get("trailing_silence_s", s.layout.trailing_silence);
  sec.get("min_utterance_s", s.layout.min_utterance);
  sec.get("max_utterance_s", s.layout.max_utterance);
  sec.get("min_gap_s", s.layout.min_gap);
  sec.get("max_gap_s", s.layout.max_gap);
  sec.get("static_shift_gain", s.static_shift_gain);
  sec.get("static_interference_ratio", s.static_interference_ratio);
  sec.get("phase_drift_rad_per_s", s.phase_drift);
}

void read_radar(const json& j, synth::RadarConfig& r) {
  Section sec(j, "radar");
  sec.get("start_frequency_hz", r.start_frequency);
  sec.get("bandwidth_hz", r.bandwidth);
  sec.get("chirp_slope_hz_per_s", r.chirp_slope);
  sec.get("samples_per_chirp", r.samples_per_chirp);
  sec.get("chirps_per_frame", r.chirps_per_frame);
  sec.get("frame_duration_s", r.frame_duration);
  sec.get("rx_antennas", r.rx_antennas);
  sec.get("rx_spacing_half_wavelengths", r.rx_spacing);
  sec.get("path_loss_exponent", r.path_loss_exponent);
  sec.get("self_noise_std", r.self_noise_std);
}

void read_pipeline(const json& j, PipelineParams& p) {
  Section sec(j, "pipeline");
  sec.get("targets", p.targets);
  sec.get("gamma", p.gamma);
  sec.get("alpha", p.alpha);
  sec.get("beta", p.beta);
  sec.get("speakers", p.speakers);
  sec.get("envelope_dim", p.envelope_dim);
  sec.get("max_speakers", p.max_speakers);
  sec.get("band_lo_hz", p.band_lo);
  sec.get("band_hi_hz", p.band_hi);
  sec.get("stft_window_samples", p.stft.window);
  sec.get("stft_hop_samples", p.stft.hop);
  std::string mode = p.mask_mode == enhance::MaskMode::Oracle ? "oracle" : "spectral-gate";
  sec.get("mask_mode", mode);
  require(mode == "oracle" || mode == "spectral-gate", ErrorKind::Configuration,
          "pipeline.mask_mode must be 'oracle' or 'spectral-gate'");
  p.mask_mode = mode == "oracle" ? enhance::MaskMode::Oracle : enhance::MaskMode::SpectralGate;
  sec.get("noise_frames", p.noise_frames);
  sec.get("map_chirp_stride", p.map_chirp_stride);
  sec.get("per_speaker_steering", p.per_speaker_steering);
}

void read_sweep(const json& j, SweepAxes& a) {
  Section sec(j, "sweep");
  sec.get("distance_m", a.distance);
  sec.get("speakers", a.speakers);
  sec.get("objects", a.objects);
  std::vector<std::string> names;
  sec.get("arrangement", names);
  a.arrangement.clear();
  for (const auto& n : names) a.arrangement.push_back(synth::parse_arrangement(n));
  for (const char* key : {"distance_m", "speakers", "objects", "arrangement"})
    require(!sec.has(key) || !j.at(key).empty(), ErrorKind::Configuration,
            std::string("sweep axis '") + key + "' is empty");
}

json scene_json(const SceneConfig& s) {
  const auto& l = s.layout;
  return {{"arrangement", synth::to_string(l.arrangement)},
          {"speakers", l.speakers},
          {"objects", l.objects},
          {"utterances_per_speaker", l.utterances_per_speaker},
          {"distance_m", l.distance},
          {"include_wall", l.include_wall},
          {"leading_silence_s", l.leading_silence},
          {"trailing_silence_s", l.trailing_silence},
          {"min_utterance_s", l.min_utterance},
          {"max_utterance_s", l.max_utterance},
          {"min_gap_s", l.min_gap},
          {"max_gap_s", l.max_gap},
          {"static_shift_gain", s.static_shift_gain},
          {"static_interference_ratio", s.static_interference_ratio},
          {"phase_drift_rad_per_s", s.phase_drift}};
}

json body_json(const ExperimentConfig& c) {
  const auto& r = c.radar;
  const auto& p = c.pipeline;
  json sweep = json::object();
  if (!c.sweep.distance.empty()) sweep["distance_m"] = c.sweep.distance;
  if (!c.sweep.speakers.empty()) sweep["speakers"] = c.sweep.speakers;
  if (!c.sweep.objects.empty()) sweep["objects"] = c.sweep.objects;
  if (!c.sweep.arrangement.empty()) {
    std::vector<std::string> names;
    for (auto a : c.sweep.arrangement) names.push_back(synth::to_string(a));
    sweep["arrangement"] = names;
  }
  return {{"seed", c.seed},
          {"scene", scene_json(c.scene)},
          {"radar",
           {{"start_frequency_hz", r.start_frequency},
            {"bandwidth_hz", r.bandwidth},
            {"chirp_slope_hz_per_s", r.chirp_slope},
            {"samples_per_chirp", r.samples_per_chirp},
            {"chirps_per_frame", r.chirps_per_frame},
            {"frame_duration_s", r.frame_duration},
            {"rx_antennas", r.rx_antennas},
            {"rx_spacing_half_wavelengths", r.rx_spacing},
            {"path_loss_exponent", r.path_loss_exponent},
            {"self_noise_std", r.self_noise_std}}},
          {"pipeline",
           {{"targets", p.targets},
            {"gamma", p.gamma},
            {"alpha", p.alpha},
            {"beta", p.beta},
            {"speakers", p.speakers},
            {"envelope_dim", p.envelope_dim},
            {"max_speakers", p.max_speakers},
            {"band_lo_hz", p.band_lo},
            {"band_hi_hz", p.band_hi},
            {"stft_window_samples", p.stft.window},
            {"stft_hop_samples", p.stft.hop},
            {"mask_mode", p.mask_mode == enhance::MaskMode::Oracle ? "oracle" : "spectral-gate"},
            {"noise_frames", p.noise_frames},
            {"map_chirp_stride", p.map_chirp_stride},
            {"per_speaker_steering", p.per_speaker_steering}}},
          {"sweep", sweep}};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto& p = pipeline;
  const auto& l = scene.layout;
  require(p.targets >= 1, ErrorKind::Parameter, "pipeline.targets (M) must be >= 1");
  require(p.gamma >= 0.0 && p.gamma < 1.0, ErrorKind::Parameter, "pipeline.gamma must be in [0, 1)");
  require(p.alpha >= 1.0, ErrorKind::Parameter, "pipeline.alpha must be >= 1");
  require(p.beta > 0.0 && p.beta < 1.0, ErrorKind::Parameter, "pipeline.beta must be in (0, 1)");
  require(p.max_speakers >= 2 && p.max_speakers <= 8, ErrorKind::Parameter, "pipeline.max_speakers must be in [2, 8]");
  require(p.speakers <= 8, ErrorKind::Parameter, "pipeline.speakers must be <= 8");
  require(p.envelope_dim >= 1, ErrorKind::Parameter, "pipeline.envelope_dim must be >= 1");
  require(p.noise_frames >= 1, ErrorKind::Parameter, "pipeline.noise_frames must be >= 1");
  require(p.map_chirp_stride >= 1, ErrorKind::Parameter, "pipeline.map_chirp_stride must be >= 1");
  require(p.band_lo > 0.0 && p.band_lo < p.band_hi && p.band_hi < radar.slow_time_rate() / 2.0, ErrorKind::Parameter,
          "pipeline band must satisfy 0 < lo < hi < slow-time rate / 2");
  amplify::check_cola(p.stft);
  radar.validate();
  require(l.speakers >= 1 && l.speakers <= 5, ErrorKind::Parameter, "scene.speakers must be in [1, 5]");
  require(l.objects >= 1 && l.objects <= 4, ErrorKind::Parameter, "scene.objects must be in [1, 4]");
  require(l.utterances_per_speaker >= 1, ErrorKind::Parameter, "scene.utterances_per_speaker must be >= 1");
  require(l.distance > 0.0, ErrorKind::Parameter, "scene.distance_m must be positive");
  require(scene.static_shift_gain >= 0.0 && scene.static_interference_ratio >= 0.0, ErrorKind::Parameter,
          "scene static interference parameters must be >= 0");
  for (double d : sweep.distance) require(d > 0.0, ErrorKind::Parameter, "sweep distances must be positive");
  for (auto n : sweep.speakers) require(n >= 1 && n <= 5, ErrorKind::Parameter, "sweep speaker counts must be in [1, 5]");
  for (auto n : sweep.objects) require(n >= 1 && n <= 4, ErrorKind::Parameter, "sweep object counts must be in [1, 4]");
}

std::string ExperimentConfig::fingerprint() const {
  const auto digest = derive_seed(0, body_json(*this).dump());
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << digest;
  return ss.str();
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Configuration, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  {
    Section top(j, "config");
    top.get("seed", c.seed);
    std::string out = c.output_dir.string();
    top.get("output_dir", out);
    c.output_dir = out;
    if (top.has("scene_path")) {
      std::string scene_path;
      top.get("scene_path", scene_path);
      const auto resolved = base_dir / scene_path;
      const json scene_file = json::parse(read_file(resolved));
      read_scene(scene_file.contains("scene") ? scene_file.at("scene") : scene_file, c.scene);
    }
    if (top.has("scene")) read_scene(top.at("scene"), c.scene);
    if (top.has("radar")) read_radar(top.at("radar"), c.radar);
    if (top.has("pipeline")) read_pipeline(top.at("pipeline"), c.pipeline);
    if (top.has("sweep")) read_sweep(top.at("sweep"), c.sweep);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string to_json(const ExperimentConfig& config) {
  auto j = body_json(config);
  j["output_dir"] = config.output_dir.string();
  return j.dump(2) + "\n";
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv("MMVIB_OUT"); env != nullptr && *env != '\0') return env;
  return std::filesystem::current_path();
}

}  // namespace mmvib::pipeline
