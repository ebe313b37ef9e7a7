#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmvib/core/types.hpp"

namespace mmvib::io {

// Flat tensor file layout (all little-endian):
//   bytes 0..7   magic "MMVTNSR1"
//   uint32       rank
//   uint64[rank] dims, outermost first
//   float64[...] row-major payload; complex tensors carry a trailing dim of 2 (re, im)
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

void write_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                  std::span<const double> data);
void write_complex_tensor(const std::filesystem::path& path, std::vector<std::uint64_t> dims,
                          std::span<const cplx> data);
Tensor read_tensor(const std::filesystem::path& path);

/// Minimal CSV writer with fixed numeric formatting so repeated runs produce
/// byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void header(std::initializer_list<std::string_view> cols);
  void header(const std::vector<std::string>& cols);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::string_view v);
  void end_row();

 private:
  struct Impl;
  Impl* impl_;
  bool first_in_row_ = true;
};

std::string format_double(double v);

/// 16-bit little-endian mono PCM, peak-normalized, plus "<path>.txt" sidecar
/// with the sample rate and the scale factor applied.
void write_pcm16(const std::filesystem::path& path, std::span<const double> signal, double sample_rate);

/// Grayscale-to-colormap PNG heatmap; values are mapped linearly from
/// [min,max] (or dB when `log_scale`). Rows become image rows, top to bottom.
void write_heatmap_png(const std::filesystem::path& path, const RealMatrix& m, bool log_scale);

}  // namespace mmvib::io
