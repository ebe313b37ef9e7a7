#include "mmvib/enhance/enhance.hpp"

#include <algorithm>
#include <cmath>

#include "mmvib/core/error.hpp"

namespace mmvib::enhance {
namespace {

void require_same_shape(std::span<const amplify::STFTMatrix> stfts) {
  require(!stfts.empty(), ErrorKind::EmptySelection, "beamforming needs at least one object");
  for (const auto& s : stfts)
    require(s.frames() == stfts.front().frames() && s.bins() == stfts.front().bins(), ErrorKind::ShapeMismatch,
            "object STFTs differ in shape");
}

void require_mask_shape(const RealMatrix& m, const amplify::STFTMatrix& s) {
  require(m.rows == s.frames() && m.cols == s.bins(), ErrorKind::ShapeMismatch, "mask shape differs from its STFT");
}

std::vector<std::size_t> all_frames(std::size_t n) {
  std::vector<std::size_t> f(n);
  for (std::size_t t = 0; t < n; ++t) f[t] = t;
  return f;
}

}  // namespace

void MaskedSTFT::validate() const {
  require_same_shape(stfts);
  require(speech_masks.size() == stfts.size() && noise_masks.size() == stfts.size(), ErrorKind::ShapeMismatch,
          "one speech and one noise mask per object required");
  for (std::size_t i = 0; i < stfts.size(); ++i) {
    require_mask_shape(speech_masks[i], stfts[i]);
    require_mask_shape(noise_masks[i], stfts[i]);
    for (const auto* m : {&speech_masks[i], &noise_masks[i]})
      for (double v : m->data) require(v >= 0.0 && v <= 1.0, ErrorKind::Parameter, "mask values must lie in [0, 1]");
  }
}

MaskSet estimate_masks(std::span<const amplify::STFTMatrix> stfts, MaskMode mode, const std::vector<RealMatrix>* truth,
                       std::span<const amplify::NoiseProfile> noise, const SpectralGateParams& params) {
  require_same_shape(stfts);
  MaskSet out;
  if (mode == MaskMode::Oracle) {
    require(truth != nullptr, ErrorKind::Parameter, "oracle masks need simulator ground truth");
    require(truth->size() == stfts.size(), ErrorKind::ShapeMismatch, "one ground-truth mask per object required");
    out.speech = *truth;
    for (std::size_t i = 0; i < stfts.size(); ++i) require_mask_shape(out.speech[i], stfts[i]);
  } else {
    require(noise.size() == stfts.size(), ErrorKind::ShapeMismatch, "spectral gate needs a noise profile per object");
    require(params.alpha >= 0.0 && params.softness > 0.0, ErrorKind::Parameter, "invalid spectral gate parameters");
    for (std::size_t i = 0; i < stfts.size(); ++i) {
      const auto& y = stfts[i];
      require(noise[i].magnitude.size() == y.bins(), ErrorKind::ShapeMismatch, "noise profile bins differ from STFT");
      RealMatrix m(y.frames(), y.bins());
      for (std::size_t t = 0; t < y.frames(); ++t)
        for (std::size_t k = 0; k < y.bins(); ++k) {
          const double d = noise[i].magnitude[k];
          const double mag = std::abs(y.values(t, k));
          // A silent bin has no scale: any energy counts as speech.
          m(t, k) = d > 0.0 ? 1.0 / (1.0 + std::exp(-(mag - params.alpha * d) / (params.softness * d)))
                            : (mag > 0.0 ? 1.0 : 0.0);
        }
      out.speech.push_back(std::move(m));
    }
  }
  for (const auto& s : out.speech) {
    RealMatrix n(s.rows, s.cols);
    for (std::size_t j = 0; j < s.data.size(); ++j) n.data[j] = 1.0 - s.data[j];
    out.noise.push_back(std::move(n));
  }
  return out;
}

RealMatrix median_combine_masks(std::span<const RealMatrix> masks) {
  require(!masks.empty(), ErrorKind::EmptySelection, "median combination needs at least one mask");
  for (const auto& m : masks)
    require(m.rows == masks.front().rows && m.cols == masks.front().cols, ErrorKind::ShapeMismatch,
            "masks differ in shape");
  RealMatrix out(masks.front().rows, masks.front().cols);
  std::vector<double> v(masks.size());
  const std::size_t mid = (v.size() - 1) / 2;
  for (std::size_t j = 0; j < out.data.size(); ++j) {
    for (std::size_t i = 0; i < masks.size(); ++i) v[i] = masks[i].data[j];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    out.data[j] = v[mid];
  }
  return out;
}

SpatialCovariances spatial_covariance(std::span<const amplify::STFTMatrix> stfts, const RealMatrix& mask,
                                      std::span<const std::size_t> frames) {
  require_same_shape(stfts);
  require_mask_shape(mask, stfts.front());
  const auto m = static_cast<Eigen::Index>(stfts.size());
  const std::size_t bins = stfts.front().bins();
  const auto every = frames.empty() ? all_frames(stfts.front().frames()) : std::vector<std::size_t>();
  const std::span<const std::size_t> use = frames.empty() ? std::span<const std::size_t>(every) : frames;

  SpatialCovariances out;
  out.bins.resize(bins);
  out.fallback.assign(bins, false);
  Eigen::VectorXcd y(m);
  for (std::size_t k = 0; k < bins; ++k) {
    Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(m, m);
    double mass = 0.0;
    for (std::size_t t : use) {
      require(t < mask.rows, ErrorKind::Parameter, "frame index outside the STFT");
      const double w = mask(t, k);
      if (w == 0.0) continue;
      for (Eigen::Index i = 0; i < m; ++i) y(i) = stfts[static_cast<std::size_t>(i)].values(t, k);
      phi.noalias() += w * (y * y.adjoint());
      mass += w;
    }
    if (mass < kMinMaskMass) {
      out.bins[k] = Eigen::MatrixXcd::Identity(m, m);
      out.fallback[k] = true;
    } else {
      phi /= mass;
      out.bins[k] = 0.5 * (phi + phi.adjoint());  // exact Hermitian symmetry
    }
  }
  return out;
}

MvdrWeights mvdr_weights(const SpatialCovariances& speech, const SpatialCovariances& noise) {
  require(speech.bins.size() == noise.bins.size() && speech.channels() == noise.channels(), ErrorKind::ShapeMismatch,
          "speech and noise covariances differ in shape");
  const auto m = static_cast<Eigen::Index>(speech.channels());
  MvdrWeights out;
  for (std::size_t k = 0; k < speech.bins.size(); ++k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(speech.bins[k]);
    Eigen::VectorXcd d = eig.eigenvectors().col(m - 1);
    if (std::abs(d(0)) > 1e-12 * d.norm())
      d /= d(0);
    else
      d /= d.norm();  // reference channel carries no speech in this bin

    const double eps = 1e-6 * noise.bins[k].trace().real() / static_cast<double>(m);
    Eigen::MatrixXcd r = noise.bins[k];
    r.diagonal().array() += eps;
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(r);
    require(ldlt.info() == Eigen::Success, ErrorKind::Fitting, "loaded noise covariance is singular");
    const Eigen::VectorXcd rd = ldlt.solve(d);
    const cplx denom = d.dot(rd);  // d^H R^-1 d
    require(std::abs(denom) > 0.0 && std::isfinite(std::abs(denom)), ErrorKind::Fitting,
            "loaded noise covariance is singular");
    out.steering.push_back(d);
    out.weights.push_back(rd / std::conj(denom));
    out.loading.push_back(eps);
  }
  return out;
}

amplify::STFTMatrix apply_weights(std::span<const amplify::STFTMatrix> stfts, const MvdrWeights& weights,
                                  std::span<const std::size_t> frames, amplify::STFTMatrix* into) {
  require_same_shape(stfts);
  require(weights.weights.size() == stfts.front().bins(), ErrorKind::ShapeMismatch, "one weight vector per bin required");
  amplify::STFTMatrix out;
  if (into == nullptr) {
    out = stfts.front();
    std::fill(out.values.data.begin(), out.values.data.end(), cplx{});
  }
  amplify::STFTMatrix& dst = into != nullptr ? *into : out;
  const auto every = frames.empty() ? all_frames(stfts.front().frames()) : std::vector<std::size_t>();
  const std::span<const std::size_t> use = frames.empty() ? std::span<const std::size_t>(every) : frames;
  for (std::size_t t : use)
    for (std::size_t k = 0; k < dst.bins(); ++k) {
      cplx acc{};
      const auto& w = weights.weights[k];
      for (std::size_t i = 0; i < stfts.size(); ++i) acc += std::conj(w(static_cast<Eigen::Index>(i))) * stfts[i].values(t, k);
      dst.values(t, k) = acc;
    }
  return out;
}

EnhancementResult enhance(const MaskedSTFT& input, const EnhanceOptions& options, std::span<const int> frame_group) {
  input.validate();
  std::vector<amplify::STFTMatrix> y;
  y.reserve(input.channels());
  for (const auto& s : input.stfts) {
    y.push_back(options.denoise ? options.denoise(s) : s);
    require(y.back().frames() == s.frames() && y.back().bins() == s.bins(), ErrorKind::ShapeMismatch,
            "denoise hook changed the STFT shape");
  }
  const std::size_t frames = y.front().frames();
  require(frame_group.empty() || frame_group.size() == frames, ErrorKind::ShapeMismatch,
          "one group entry per STFT frame required");
  for (std::size_t t : options.noise_frames) require(t < frames, ErrorKind::Parameter, "noise frame outside the STFT");

  EnhancementResult r;
  r.speech_mask = median_combine_masks(input.speech_masks);
  r.noise_mask = median_combine_masks(input.noise_masks);
  const auto noise_cov = spatial_covariance(y, r.noise_mask);
  r.beamformers.push_back(mvdr_weights(spatial_covariance(y, r.speech_mask), noise_cov));
  r.frame_beamformer.assign(frames, 0);
  r.beamformed = apply_weights(y, r.beamformers.front());

  int max_group = -1;
  for (int g : frame_group) max_group = std::max(max_group, g);
  // Ungrouped frames (-1) form one more group: steering fitted to all frames
  // mixes the speakers' transfer vectors and distorts every one of them.
  for (int g = max_group >= 0 ? -1 : 0; g <= max_group; ++g) {
    std::vector<std::size_t> members;
    for (std::size_t t = 0; t < frames; ++t)
      if (frame_group[t] == g) members.push_back(t);
    if (members.empty()) continue;
    const auto speech_cov = spatial_covariance(y, r.speech_mask, members);
    auto w = mvdr_weights(speech_cov, noise_cov);
    // Bins without speech mass in this group keep the global steering.
    for (std::size_t k = 0; k < w.weights.size(); ++k)
      if (speech_cov.fallback[k]) {
        w.weights[k] = r.beamformers.front().weights[k];
        w.steering[k] = r.beamformers.front().steering[k];
      }
    apply_weights(y, w, members, &r.beamformed);
    for (std::size_t t : members) r.frame_beamformer[t] = static_cast<int>(r.beamformers.size());
    r.beamformers.push_back(std::move(w));
    if (g >= 0) ++r.groups;
  }

  r.spectrum = r.beamformed;
  if (options.post_filter && !options.noise_frames.empty()) {
    const auto& pf = *options.post_filter;
    require(pf.over_subtraction_alpha >= 0.0 && pf.spectral_floor_beta >= 0.0 && pf.spectral_floor_beta < 1.0,
            ErrorKind::Parameter, "invalid post-filter parameters");
    const std::size_t bins = y.front().bins();
    // Noise magnitude each beamformer leaves behind, measured on the quiet frames.
    r.post_noise = RealMatrix(r.beamformers.size(), bins);
    for (std::size_t b = 0; b < r.beamformers.size(); ++b)
      for (std::size_t k = 0; k < bins; ++k) {
        const auto& w = r.beamformers[b].weights[k];
        double sum = 0.0;
        for (std::size_t t : options.noise_frames) {
          cplx acc{};
          for (std::size_t i = 0; i < y.size(); ++i) acc += std::conj(w(static_cast<Eigen::Index>(i))) * y[i].values(t, k);
          sum += std::abs(acc);
        }
        r.post_noise(b, k) = sum / static_cast<double>(options.noise_frames.size());
      }
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t k = 0; k < bins; ++k) {
        cplx& v = r.spectrum.values(t, k);
        const double mag = std::abs(v);
        if (mag == 0.0) continue;
        const double d = r.post_noise(static_cast<std::size_t>(r.frame_beamformer[t]), k);
        v *= std::max(mag - pf.over_subtraction_alpha * d, pf.spectral_floor_beta * mag) / mag;
      }
  }
  r.audio = amplify::istft(r.spectrum);
  return r;
}

}  // namespace mmvib::enhance
