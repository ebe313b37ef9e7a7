#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mmvib/amplify/spectral_subtraction.hpp"
#include "mmvib/core/types.hpp"

// Speaker distinction: per-segment spectral envelopes, diagonal GMM, and
// Calinski-Harabasz selection of the speaker count.
namespace mmvib::cluster {

struct EnvelopeParams {
  std::size_t dimension = 64;  // D
  std::size_t bin_lo = 0;      // bin range the envelope is taken over, [lo, hi]
  std::size_t bin_hi = 0;      // 0 means the last bin
};

/// Per-bin maximum magnitude (sqrt P) over frames [first, last), 3-bin
/// moving average, linear resampling to D points, L2 normalization.
std::vector<double> spectral_envelope(const amplify::PowerSpectrogram& p, IndexInterval frames,
                                      const EnvelopeParams& params = {});

/// Concatenation of per-target envelopes in the given (target-rank) order.
std::vector<double> build_feature(std::span<const std::vector<double>> envelopes);

/// Row-major feature matrix, one row per segment.
struct FeatureMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  void append(std::span<const double> r);
};

struct GmmOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;   // on the per-sample objective
  double variance_prior = 1e-6;  // 2*beta of an inverse-gamma-shaped prior on each variance
};

struct ClusterResult {
  std::vector<int> labels;   // hard labels, argmax responsibility
  std::size_t components = 0;
  RealMatrix responsibilities;   // rows x components
  RealMatrix means, variances;   // components x dims
  std::vector<double> weights;
  double log_likelihood = 0.0;   // data log-likelihood at the final parameters
  double objective = 0.0;        // log-likelihood plus the variance prior term
  std::vector<double> objective_history;  // per-sample objective after each EM iteration of the kept restart
  bool monotone = true;          // objective never decreased, across every restart
  std::size_t reseeds = 0;       // empty components re-seeded, across every restart
  std::size_t iterations = 0;
};

/// Diagonal-covariance GMM by EM, k-means++ starts, best of `restarts`.
ClusterResult gmm_cluster(const FeatureMatrix& features, std::size_t components, std::uint64_t seed,
                          const GmmOptions& options = {});

/// [tr(B)/(K-1)] / [tr(W)/(n-K)] over the K non-empty clusters of `labels`.
/// 0 when fewer than two clusters are populated; +inf when W vanishes.
double calinski_harabasz(const FeatureMatrix& features, std::span<const int> labels);

struct SpeakerCountEstimate {
  std::size_t speakers = 0;
  std::vector<std::size_t> candidates;  // N values tried
  std::vector<double> ch_scores;        // aligned with candidates
  ClusterResult clustering;             // fit for the chosen N
  bool monotone = true;                 // every EM run monotone
};

/// CH over N = 2..N_max on GMM hard labels; argmax, ties to the smaller N.
SpeakerCountEstimate estimate_num_speakers(const FeatureMatrix& features, std::size_t max_speakers, std::uint64_t seed,
                                           const GmmOptions& options = {});

void write_cluster_report(const std::filesystem::path& path, const ClusterResult& result);
void write_ch_curve(const std::filesystem::path& path, const SpeakerCountEstimate& estimate);

}  // namespace mmvib::cluster
