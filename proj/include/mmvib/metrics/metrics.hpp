#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "mmvib/core/types.hpp"

namespace mmvib::metrics {

inline constexpr double kMetricCapDb = 100.0;
inline constexpr std::size_t kMaxMatchedLabels = 8;

/// Best accuracy over all one-to-one maps from predicted to true label ids.
/// Negative predicted labels (missed items) never count as correct.
double success_rate(std::span<const int> predicted, std::span<const int> truth);

/// The map that achieves success_rate: predicted id -> true id (-1 unmatched).
std::vector<int> best_label_mapping(std::span<const int> predicted, std::span<const int> truth);

struct Alignment {
  long lag = 0;       // reference shifted right by `lag` samples
  double gain = 0.0;  // least-squares scale applied to the shifted reference
};

/// Lag in [-max_lag, max_lag] and gain that best explain `enhanced` by the reference.
Alignment align_reference(std::span<const double> enhanced, std::span<const double> reference, std::size_t max_lag);

/// 10 log10(|g r|^2 / |e - g r|^2) after lag and gain alignment, capped at 100 dB.
double snr_db(std::span<const double> enhanced, std::span<const double> reference, double sample_rate,
              double max_lag_seconds = 0.05);

/// Both spectrograms scaled to peak 1, then 10 log10(1 / MSE), capped at 100 dB.
double psnr_db(const RealMatrix& enhanced, const RealMatrix& clean);

struct EvaluationReport {
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::size_t speakers_true = 0;
  std::size_t speakers_estimated = 0;
  double success_rate = 0.0;
  double snr_db = 0.0;
  double psnr_db = 0.0;
  double baseline_snr_db = 0.0;   // strongest single object
  double baseline_psnr_db = 0.0;
  std::vector<int> predicted;     // per ground-truth utterance, -1 if missed
  std::vector<int> truth;
};

/// One header row plus one data row; formatting is fixed for byte-identical reruns.
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);
void write_assignments_csv(const std::filesystem::path& path, const EvaluationReport& report);

}  // namespace mmvib::metrics
