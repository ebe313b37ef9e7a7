#pragma once

#include <functional>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "mmvib/amplify/spectral_subtraction.hpp"
#include "mmvib/amplify/stft.hpp"
#include "mmvib/core/types.hpp"

namespace mmvib::enhance {

/// Per-object STFTs plus per-object speech/noise masks, all frames x bins.
/// Object 0 is the reference channel.
struct MaskedSTFT {
  std::vector<amplify::STFTMatrix> stfts;
  std::vector<RealMatrix> speech_masks;
  std::vector<RealMatrix> noise_masks;

  std::size_t channels() const { return stfts.size(); }
  void validate() const;
};

enum class MaskMode { Oracle, SpectralGate };

struct MaskSet {
  std::vector<RealMatrix> speech;
  std::vector<RealMatrix> noise;  // 1 - speech
};

struct SpectralGateParams {
  double alpha = 2.0;     // threshold in units of the noise magnitude
  double softness = 0.1;  // sigmoid width in units of the noise magnitude
};

/// Oracle: copies simulator ideal masks (already mapped to the selected
/// targets). Spectral gate: sigmoid((|Y| - alpha*D) / (softness*D)).
/// Oracle without `truth` throws.
MaskSet estimate_masks(std::span<const amplify::STFTMatrix> stfts, MaskMode mode,
                       const std::vector<RealMatrix>* truth = nullptr,
                       std::span<const amplify::NoiseProfile> noise = {}, const SpectralGateParams& params = {});

/// Elementwise median across objects; for an even count the lower of the two
/// middle values, so the result is always one of the inputs and a single
/// all-ones outlier cannot raise it above the remaining masks' median.
RealMatrix median_combine_masks(std::span<const RealMatrix> masks);

/// One M x M Hermitian matrix per frequency bin.
struct SpatialCovariances {
  std::vector<Eigen::MatrixXcd> bins;
  std::vector<bool> fallback;  // bin had too little mask mass, identity used

  std::size_t channels() const { return bins.empty() ? 0 : static_cast<std::size_t>(bins.front().rows()); }
};

inline constexpr double kMinMaskMass = 1e-6;

/// Phi(f) = sum_t m(t,f) y y^H / sum_t m(t,f). `frames` restricts the sum to a
/// frame subset (empty = all frames).
SpatialCovariances spatial_covariance(std::span<const amplify::STFTMatrix> stfts, const RealMatrix& mask,
                                      std::span<const std::size_t> frames = {});

struct MvdrWeights {
  std::vector<Eigen::VectorXcd> steering;  // reference component 1
  std::vector<Eigen::VectorXcd> weights;
  std::vector<double> loading;             // epsilon added to the noise diagonal
};

/// Steering = principal eigenvector of Phi_speech; w = R^-1 d / (d^H R^-1 d)
/// with R = Phi_noise + eps I, eps = 1e-6 trace(Phi_noise) / M.
MvdrWeights mvdr_weights(const SpatialCovariances& speech, const SpatialCovariances& noise);

/// out(t,f) = w(f)^H y(t,f).
amplify::STFTMatrix apply_weights(std::span<const amplify::STFTMatrix> stfts, const MvdrWeights& weights,
                                  std::span<const std::size_t> frames = {}, amplify::STFTMatrix* into = nullptr);

/// Optional denoiser applied per object before beamforming; identity by default.
using DenoiseHook = std::function<amplify::STFTMatrix(const amplify::STFTMatrix&)>;

struct EnhanceOptions {
  DenoiseHook denoise;  // empty = identity
  /// Spectral subtraction after beamforming. Each frame is cleaned with the
  /// noise magnitude its own beamformer leaves on `noise_frames`.
  std::optional<amplify::SubtractionParams> post_filter;
  std::vector<std::size_t> noise_frames;
};

struct EnhancementResult {
  amplify::STFTMatrix spectrum;    // after the optional post-filter
  amplify::STFTMatrix beamformed;  // MVDR output before it
  RealSeries audio;                // istft of `spectrum`
  RealMatrix speech_mask;          // median-combined
  RealMatrix noise_mask;
  std::vector<MvdrWeights> beamformers;  // [0] is the global one
  std::vector<int> frame_beamformer;     // index into `beamformers` per frame
  RealMatrix post_noise;                 // beamformer x bin noise magnitude, empty without post-filter
  std::size_t groups = 0;                // per-group speech covariances used
};

/// Full Module 4 chain. When `frame_group` is given (one entry per frame, -1
/// for none), each group gets its own speech covariance and steering vector
/// while the noise covariance stays shared. Ungrouped frames are pooled into
/// one extra group; bins without speech mass in a group use the global beamformer.
EnhancementResult enhance(const MaskedSTFT& input, const EnhanceOptions& options = {},
                          std::span<const int> frame_group = {});

}  // namespace mmvib::enhance
