#include "mmvib/core/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "mmvib/core/error.hpp"

namespace mmvib::fft {
namespace {

enum class Kind { Forward, Backward, R2C, C2R };

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(Kind kind, std::size_t n) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    const int ni = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    // Planning with FFTW_ESTIMATE never touches the arrays' contents.
    std::vector<cplx> a(n + 1), b(n + 1);
    std::vector<double> r(n + 2);
    auto* ca = reinterpret_cast<fftw_complex*>(a.data());
    auto* cb = reinterpret_cast<fftw_complex*>(b.data());
    switch (kind) {
      case Kind::Forward: plan = fftw_plan_dft_1d(ni, ca, cb, FFTW_FORWARD, flags); break;
      case Kind::Backward: plan = fftw_plan_dft_1d(ni, ca, cb, FFTW_BACKWARD, flags); break;
      case Kind::R2C: plan = fftw_plan_dft_r2c_1d(ni, r.data(), ca, flags); break;
      case Kind::C2R: plan = fftw_plan_dft_c2r_1d(ni, ca, r.data(), flags); break;
    }
    if (plan == nullptr) fail(ErrorKind::Parameter, "FFTW could not plan a transform of size " + std::to_string(n));
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<Kind, std::size_t>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void run_c2c(Kind kind, std::span<const cplx> in, std::span<cplx> out) {
  require(in.size() == out.size(), ErrorKind::ShapeMismatch, "fft input/output sizes differ");
  if (in.empty()) return;
  fftw_plan plan = cache().get(kind, in.size());
  // FFTW's execute signature takes non-const input; c2c never writes it.
  std::vector<cplx> tmp(in.begin(), in.end());
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()), reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace

void forward(std::span<const cplx> in, std::span<cplx> out) { run_c2c(Kind::Forward, in, out); }
void backward(std::span<const cplx> in, std::span<cplx> out) { run_c2c(Kind::Backward, in, out); }

ComplexSeries forward(std::span<const cplx> in) {
  ComplexSeries out(in.size());
  forward(in, out);
  return out;
}

ComplexSeries inverse(std::span<const cplx> in) {
  ComplexSeries out(in.size());
  backward(in, out);
  const double scale = in.empty() ? 1.0 : 1.0 / static_cast<double>(in.size());
  for (auto& v : out) v *= scale;
  return out;
}

ComplexSeries rfft(std::span<const double> in) {
  const std::size_t n = in.size();
  ComplexSeries out(n / 2 + 1);
  if (n == 0) return out;
  fftw_plan plan = cache().get(Kind::R2C, n);
  std::vector<double> tmp(in.begin(), in.end());
  fftw_execute_dft_r2c(plan, tmp.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

RealSeries irfft(std::span<const cplx> spectrum, std::size_t n) {
  require(spectrum.size() == n / 2 + 1, ErrorKind::ShapeMismatch, "irfft spectrum length must be n/2+1");
  RealSeries out(n);
  if (n == 0) return out;
  fftw_plan plan = cache().get(Kind::C2R, n);
  // c2r destroys its input, so hand it a copy.
  std::vector<cplx> tmp(spectrum.begin(), spectrum.end());
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(tmp.data()), out.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return out;
}

std::size_t good_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace mmvib::fft
