#pragma once

#include <span>

#include "mmvib/core/types.hpp"

// Thin FFTW wrapper. Plans are cached per (size, kind) and executed with the
// new-array interface, so the functions below are safe to call concurrently.
namespace mmvib::fft {

/// Unnormalized forward DFT: X[k] = sum_n x[n] e^{-j 2 pi k n / N}.
void forward(std::span<const cplx> in, std::span<cplx> out);
/// Unnormalized inverse DFT (no 1/N factor).
void backward(std::span<const cplx> in, std::span<cplx> out);

ComplexSeries forward(std::span<const cplx> in);
/// Inverse DFT including the 1/N factor.
ComplexSeries inverse(std::span<const cplx> in);

/// One-sided spectrum of a real signal, N/2+1 bins, unnormalized.
ComplexSeries rfft(std::span<const double> in);
/// Inverse of rfft for a signal of length n, including the 1/n factor.
RealSeries irfft(std::span<const cplx> spectrum, std::size_t n);

/// Smallest size >= n whose only prime factors are 2, 3, 5 and 7.
std::size_t good_size(std::size_t n);

}  // namespace mmvib::fft
