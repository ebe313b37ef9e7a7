#include "mmvib/core/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "mmvib/core/error.hpp"

namespace mmvib::io {
namespace {

constexpr char kMagic[8] = {'M', 'M', 'V', 'T', 'N', 'S', 'R', '1'};

static_assert(std::endian::native == std::endian::little, "tensor files are written with native little-endian layout");

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  return f;
}

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

void write_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                  std::span<const double> data) {
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  require(count == data.size(), ErrorKind::ShapeMismatch, "tensor dims do not match payload for " + path.string());
  auto f = open_out(path);
  f.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint64_t>(f, d);
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  require(f.good(), ErrorKind::Io, "write failed for " + path.string());
}

void write_complex_tensor(const std::filesystem::path& path, std::vector<std::uint64_t> dims,
                          std::span<const cplx> data) {
  dims.push_back(2);
  std::span<const double> flat(reinterpret_cast<const double*>(data.data()), data.size() * 2);
  write_tensor(path, dims, flat);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::Io, "cannot open " + path.string());
  char magic[8];
  f.read(magic, sizeof(magic));
  require(f.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorKind::Io, "bad tensor magic in " + path.string());
  std::uint32_t rank = 0;
  f.read(reinterpret_cast<char*>(&rank), sizeof(rank));
  Tensor t;
  t.dims.resize(rank);
  std::uint64_t count = 1;
  for (auto& d : t.dims) {
    f.read(reinterpret_cast<char*>(&d), sizeof(d));
    count *= d;
  }
  t.data.resize(count);
  f.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(count * sizeof(double)));
  require(f.good(), ErrorKind::Io, "truncated tensor file " + path.string());
  return t;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct CsvWriter::Impl {
  std::ofstream out;
};

CsvWriter::CsvWriter(const std::filesystem::path& path) : impl_(new Impl{open_out(path)}) {}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::header(std::initializer_list<std::string_view> cols) {
  for (auto c : cols) cell(c);
  end_row();
}

void CsvWriter::header(const std::vector<std::string>& cols) {
  for (const auto& c : cols) cell(std::string_view(c));
  end_row();
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::string_view(std::to_string(v))); }

CsvWriter& CsvWriter::cell(std::string_view v) {
  if (!first_in_row_) impl_->out << ',';
  if (v.find_first_of(",\"\n") == std::string_view::npos) {
    impl_->out << v;
  } else {
    impl_->out << '"';
    for (char c : v) {
      if (c == '"') impl_->out << '"';
      impl_->out << c;
    }
    impl_->out << '"';
  }
  first_in_row_ = false;
  return *this;
}

void CsvWriter::end_row() {
  impl_->out << '\n';
  first_in_row_ = true;
}

void write_pcm16(const std::filesystem::path& path, std::span<const double> signal, double sample_rate) {
  double peak = 0.0;
  for (double v : signal) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 32767.0 / peak : 0.0;
  auto f = open_out(path);
  for (double v : signal) {
    const auto s = static_cast<std::int16_t>(std::lround(std::clamp(v * scale, -32768.0, 32767.0)));
    const std::uint16_t u = std::bit_cast<std::uint16_t>(s);
    const char bytes[2] = {static_cast<char>(u & 0xFF), static_cast<char>(u >> 8)};
    f.write(bytes, 2);
  }
  auto side = open_out(std::filesystem::path(path.string() + ".txt"));
  side << "format=pcm_s16le\nchannels=1\nsample_rate_hz=" << format_double(sample_rate)
       << "\nsamples=" << signal.size() << "\nscale=" << format_double(scale) << "\n";
}

namespace {

std::array<unsigned char, 3> colormap(double u) {
  // Piecewise-linear dark-blue -> purple -> orange -> pale-yellow ramp.
  static constexpr std::array<std::array<double, 3>, 5> stops = {{
      {0.00, 0.00, 0.02}, {0.25, 0.05, 0.45}, {0.70, 0.18, 0.38}, {0.98, 0.55, 0.04}, {0.99, 1.00, 0.64}}};
  u = std::clamp(u, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(u));
  const double f = u - static_cast<double>(i);
  std::array<unsigned char, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<unsigned char>(std::lround(255.0 * (stops[i][c] * (1 - f) + stops[i + 1][c] * f)));
  return rgb;
}

}  // namespace

void write_heatmap_png(const std::filesystem::path& path, const RealMatrix& m, bool log_scale) {
  require(m.rows > 0 && m.cols > 0, ErrorKind::ShapeMismatch, "empty heatmap");
  std::vector<double> v(m.data);
  if (log_scale) {
    const double peak = *std::max_element(v.begin(), v.end());
    for (auto& x : v) x = 10.0 * std::log10(std::max(x, peak * 1e-8) + 1e-300);
  }
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, span = std::max(*hi_it - *lo_it, 1e-300);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  require(fp != nullptr, ErrorKind::Io, "cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorKind::Io, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(m.cols), static_cast<png_uint_32>(m.rows), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks: output bytes depend only on the pixels.
  png_write_info(png, info);
  std::vector<unsigned char> row(m.cols * 3);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      const auto rgb = colormap((v[r * m.cols + c] - lo) / span);
      std::copy(rgb.begin(), rgb.end(), row.begin() + static_cast<std::ptrdiff_t>(c * 3));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace mmvib::io
