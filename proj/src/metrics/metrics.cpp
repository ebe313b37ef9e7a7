#include "mmvib/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmvib/core/error.hpp"
#include "mmvib/core/fft.hpp"
#include "mmvib/core/io.hpp"

namespace mmvib::metrics {
namespace {

std::vector<int> distinct(std::span<const int> labels) {
  std::vector<int> v;
  for (int l : labels)
    if (l >= 0) v.push_back(l);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double capped_db(double signal, double noise) {
  if (noise <= 0.0 || signal / noise >= std::pow(10.0, kMetricCapDb / 10.0)) return kMetricCapDb;
  return std::min(kMetricCapDb, 10.0 * std::log10(signal / noise));
}

// Circular-free cross-correlation c[lag] = sum_n e[n] r[n - lag] for |lag| <= max_lag.
std::vector<double> cross_correlation(std::span<const double> e, std::span<const double> r, std::size_t max_lag) {
  const std::size_t n = fft::good_size(e.size() + r.size());
  std::vector<double> a(n, 0.0), b(n, 0.0);
  std::copy(e.begin(), e.end(), a.begin());
  std::copy(r.begin(), r.end(), b.begin());
  auto fa = fft::rfft(a);
  const auto fb = fft::rfft(b);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= std::conj(fb[k]);
  const auto c = fft::irfft(fa, n);
  std::vector<double> out(2 * max_lag + 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const long lag = static_cast<long>(i) - static_cast<long>(max_lag);
    out[i] = c[static_cast<std::size_t>((lag % static_cast<long>(n) + static_cast<long>(n)) % static_cast<long>(n))];
  }
  return out;
}

}  // namespace

std::vector<int> best_label_mapping(std::span<const int> predicted, std::span<const int> truth) {
  require(predicted.size() == truth.size(), ErrorKind::ShapeMismatch, "predicted and true labels differ in length");
  const auto p = distinct(predicted);
  const auto t = distinct(truth);
  require(p.size() <= kMaxMatchedLabels && t.size() <= kMaxMatchedLabels, ErrorKind::Parameter,
          "label matching supports at most 8 clusters");
  const int max_p = p.empty() ? -1 : p.back();
  std::vector<int> mapping(static_cast<std::size_t>(max_p + 1), -1);
  if (p.empty() || t.empty()) return mapping;

  const std::size_t k = std::max(p.size(), t.size());
  std::vector<std::vector<std::size_t>> hits(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0 || truth[i] < 0) continue;
    const auto pi = static_cast<std::size_t>(std::lower_bound(p.begin(), p.end(), predicted[i]) - p.begin());
    const auto ti = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), truth[i]) - t.begin());
    ++hits[pi][ti];
  }
  // Padded slots stand for "no partner" on the shorter side.
  std::vector<std::size_t> perm(k), best;
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best_score = 0;
  bool first = true;
  do {
    std::size_t s = 0;
    for (std::size_t i = 0; i < k; ++i) s += hits[i][perm[i]];
    if (first || s > best_score) {
      best_score = s;
      best = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t i = 0; i < p.size(); ++i)
    if (best[i] < t.size()) mapping[static_cast<std::size_t>(p[i])] = t[best[i]];
  return mapping;
}

double success_rate(std::span<const int> predicted, std::span<const int> truth) {
  const auto mapping = best_label_mapping(predicted, truth);
  if (truth.empty()) return 1.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (predicted[i] >= 0 && mapping[static_cast<std::size_t>(predicted[i])] == truth[i] && truth[i] >= 0) ++correct;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

Alignment align_reference(std::span<const double> enhanced, std::span<const double> reference, std::size_t max_lag) {
  require(enhanced.size() == reference.size(), ErrorKind::ShapeMismatch, "enhanced and reference differ in length");
  const std::size_t n = reference.size();
  max_lag = std::min(max_lag, n == 0 ? 0 : n - 1);
  const auto corr = cross_correlation(enhanced, reference, max_lag);

  // Energy of the reference part that stays inside the window at each lag.
  std::vector<double> csum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) csum[i + 1] = csum[i] + reference[i] * reference[i];
  Alignment best;
  double best_score = -1.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const long lag = static_cast<long>(i) - static_cast<long>(max_lag);
    const auto a = static_cast<std::size_t>(std::abs(lag));
    const double energy = lag >= 0 ? csum[n - a] : csum[n] - csum[a];
    if (energy <= 0.0) continue;
    const double score = corr[i] * corr[i] / energy;  // energy explained by the best gain
    if (score > best_score * (1.0 + 1e-12)) {
      best_score = score;
      best = {lag, corr[i] / energy};
    }
  }
  return best;
}

double snr_db(std::span<const double> enhanced, std::span<const double> reference, double sample_rate,
              double max_lag_seconds) {
  require(enhanced.size() == reference.size(), ErrorKind::ShapeMismatch, "enhanced and reference differ in length");
  require(sample_rate > 0.0 && max_lag_seconds >= 0.0, ErrorKind::Parameter, "invalid SNR alignment parameters");
  double ref_power = 0.0;
  for (double v : reference) ref_power += v * v;
  require(ref_power > 0.0, ErrorKind::Parameter, "reference signal has zero power");

  const auto a = align_reference(enhanced, reference, static_cast<std::size_t>(std::lround(max_lag_seconds * sample_rate)));
  const long n = static_cast<long>(reference.size());
  double signal = 0.0, noise = 0.0;
  for (long i = 0; i < n; ++i) {
    const long j = i - a.lag;
    const double r = j >= 0 && j < n ? a.gain * reference[static_cast<std::size_t>(j)] : 0.0;
    signal += r * r;
    noise += (enhanced[static_cast<std::size_t>(i)] - r) * (enhanced[static_cast<std::size_t>(i)] - r);
  }
  if (signal <= 0.0) return -kMetricCapDb;
  return std::max(-kMetricCapDb, capped_db(signal, noise));
}

double psnr_db(const RealMatrix& enhanced, const RealMatrix& clean) {
  require(enhanced.rows == clean.rows && enhanced.cols == clean.cols, ErrorKind::ShapeMismatch,
          "spectrograms differ in shape");
  require(!clean.data.empty(), ErrorKind::EmptySelection, "spectrograms are empty");
  const double pe = *std::max_element(enhanced.data.begin(), enhanced.data.end());
  const double pc = *std::max_element(clean.data.begin(), clean.data.end());
  require(pe > 0.0 && pc > 0.0, ErrorKind::Parameter, "spectrogram peak must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < clean.data.size(); ++i) {
    const double d = enhanced.data[i] / pe - clean.data[i] / pc;
    mse += d * d;
  }
  mse /= static_cast<double>(clean.data.size());
  return capped_db(1.0, mse);
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& r) {
  io::CsvWriter csv(path);
  csv.header({"seed", "config_fingerprint", "speakers_true", "speakers_estimated", "success_rate", "snr_db", "psnr_db",
              "baseline_snr_db", "baseline_psnr_db"});
  csv.cell(std::to_string(r.seed))
      .cell(r.config_fingerprint)
      .cell(r.speakers_true)
      .cell(r.speakers_estimated)
      .cell(r.success_rate)
      .cell(r.snr_db)
      .cell(r.psnr_db)
      .cell(r.baseline_snr_db)
      .cell(r.baseline_psnr_db);
  csv.end_row();
}

void write_assignments_csv(const std::filesystem::path& path, const EvaluationReport& r) {
  io::CsvWriter csv(path);
  csv.header({"utterance", "true_label", "predicted_label"});
  for (std::size_t i = 0; i < r.truth.size(); ++i) {
    csv.cell(i).cell(r.truth[i]).cell(i < r.predicted.size() ? r.predicted[i] : -1);
    csv.end_row();
  }
}

}  // namespace mmvib::metrics
