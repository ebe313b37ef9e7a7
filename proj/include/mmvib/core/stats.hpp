#pragma once

#include <span>

#include "mmvib/core/types.hpp"

namespace mmvib::stats {

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // population variance
double median(std::span<const double> x);
/// Median absolute deviation (raw, not scaled to sigma).
double mad(std::span<const double> x);
/// Scale that makes MAD a consistent estimator of a Gaussian sigma.
inline constexpr double kMadToSigma = 1.4826;
double pearson_correlation(std::span<const double> a, std::span<const double> b);
double rms(std::span<const double> x);

/// 2*pi jump removal, same convention as numpy.unwrap.
RealSeries unwrap(std::span<const double> phase);
RealSeries angles(std::span<const cplx> z);

}  // namespace mmvib::stats
