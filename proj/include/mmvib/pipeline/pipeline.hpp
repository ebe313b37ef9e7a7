#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmvib/amplify/spectral_subtraction.hpp"
#include "mmvib/cluster/cluster.hpp"
#include "mmvib/enhance/enhance.hpp"
#include "mmvib/metrics/metrics.hpp"
#include "mmvib/pipeline/config.hpp"
#include "mmvib/radarcube/radarcube.hpp"
#include "mmvib/vibext/vibext.hpp"

namespace mmvib::pipeline {

enum class Stage { Simulate, Detect, Calibrate, Amplify, Cluster, Enhance, Evaluate };

const char* to_string(Stage s);
Stage parse_stage(const std::string& name);

struct TargetTrace {
  radarcube::TargetCandidate candidate;
  int truth_object = -1;  // simulated object in the same cell, -1 if none
  vibext::SpeechSegments speech;
  vibext::PhaseSignal phase;
  amplify::STFTMatrix bandpassed;
  amplify::NoiseProfile noise;
  amplify::PolarSpectrum subtracted;
  amplify::PowerSpectrogram power;
};

struct PipelineResult {
  synth::Scene scene;
  synth::GroundTruth truth;
  radarcube::RangeAngleMap map;
  std::vector<TargetTrace> targets;
  std::vector<IndexInterval> segments;        // union of per-target speech segments, samples
  std::vector<IndexInterval> segment_frames;  // the same segments as STFT frame ranges
  cluster::FeatureMatrix features;
  cluster::SpeakerCountEstimate clustering;
  std::vector<int> segment_labels;
  enhance::EnhancementResult enhancement;
  metrics::EvaluationReport report;
  std::vector<std::filesystem::path> artifacts;  // relative to the output directory
  Stage completed = Stage::Simulate;
};

struct RunOptions {
  Stage stop_after = Stage::Evaluate;
  bool write_artifacts = true;
  bool export_truth = false;  // ground-truth tensors (large); the simulate verb turns this on
};

/// Runs simulate -> detect -> calibrate -> amplify -> cluster -> enhance ->
/// evaluate up to `stop_after`. Stage failures are rethrown with the stage
/// name (and target index where one applies). The manifest is written last.
PipelineResult run_pipeline(const ExperimentConfig& config, const RunOptions& options = {});

/// Utterance-level labels: each ground-truth utterance takes the label of the
/// detected segment that overlaps it most, -1 when none overlaps.
std::vector<int> utterance_predictions(const synth::GroundTruth& truth, std::span<const IndexInterval> segments,
                                       std::span<const int> segment_labels);

struct SweepCell {
  std::string name;
  ExperimentConfig config;
};

/// Cartesian product of the sweep axes, each cell writing into its own subdirectory.
std::vector<SweepCell> sweep_cells(const ExperimentConfig& config);

struct SweepRow {
  std::string cell;
  double distance = 0.0;
  std::size_t speakers = 0, objects = 0;
  synth::Arrangement arrangement = synth::Arrangement::Natural;
  std::string status;  // "ok" or the error message
  metrics::EvaluationReport report;
};

/// Runs every cell (skipping cells with a DONE marker, whose metrics are read
/// back), records failures per cell, and writes sweep.csv in the output directory.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);

}  // namespace mmvib::pipeline
