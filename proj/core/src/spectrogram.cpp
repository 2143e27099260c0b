#include "spoofdet/spectrogram.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "spoofdet/error.hpp"
#include "spoofdet/fft.hpp"

namespace spoofdet {

void SpectrogramParams::validate() const {
  if (frame_len == 0 || overlap >= frame_len)
    throw ConfigError("spectrogram params: overlap must be smaller than frame_len");
  if (fft_size != frame_len)
    throw ConfigError("spectrogram params: fft_size must equal frame_len");
  if (out_freq_bins != 128 || out_frames != 128)
    throw ConfigError("spectrogram params: output grid is fixed at 128x128");
}

std::vector<std::vector<double>> frame_signal(const AudioSignal& signal,
                                              const SpectrogramParams& params) {
  params.validate();
  std::size_t n = signal.samples.size();
  if (n < params.frame_len)
    throw TooShortError("signal of " + std::to_string(n) + " samples is shorter than one " +
                        std::to_string(params.frame_len) + "-sample frame");
  std::size_t hop = params.hop();
  std::size_t count = (n - params.frame_len) / hop + 1;

  // Hann window, computed once per call.
  std::vector<double> window(params.frame_len);
  for (std::size_t i = 0; i < params.frame_len; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(params.frame_len - 1)));

  std::vector<std::vector<double>> frames(count);
  for (std::size_t f = 0; f < count; ++f) {
    frames[f].resize(params.frame_len);
    const double* src = signal.samples.data() + f * hop;
    for (std::size_t i = 0; i < params.frame_len; ++i) frames[f][i] = src[i] * window[i];
  }
  return frames;
}

Grid stft_magnitudes(const AudioSignal& signal, const SpectrogramParams& params) {
  auto frames = frame_signal(signal, params);
  std::size_t bins = params.fft_size / 2 + 1;
  Grid grid;
  grid.rows = bins;
  grid.cols = frames.size();
  grid.v.assign(bins * frames.size(), 0.0);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    auto spectrum = fft::real_spectrum(frames[f]);
    for (std::size_t b = 0; b < bins; ++b) grid.at(b, f) = std::abs(spectrum[b]);
  }
  return grid;
}

Grid magnitudes_to_db(const Grid& magnitudes, double db_floor) {
  double global_max = 0.0;
  for (double m : magnitudes.v) {
    if (m < 0.0 || !std::isfinite(m))
      throw ValidationError("magnitudes_to_db: magnitudes must be finite and nonnegative");
    global_max = std::max(global_max, m);
  }
  if (global_max == 0.0)
    throw DegenerateSignalError("magnitudes_to_db: all-zero magnitude grid (silent signal)");
  Grid out;
  out.rows = magnitudes.rows;
  out.cols = magnitudes.cols;
  out.v.resize(magnitudes.v.size());
  for (std::size_t i = 0; i < magnitudes.v.size(); ++i) {
    double m = magnitudes.v[i];
    out.v[i] = m <= 0.0 ? db_floor : std::max(db_floor, 20.0 * std::log10(m / global_max));
  }
  return out;
}

Grid shape_to_target(const Grid& db_grid, const SpectrogramParams& params) {
  params.validate();
  std::size_t expected_bins = params.fft_size / 2 + 1;
  if (db_grid.rows != expected_bins)
    throw DimensionError("shape_to_target: expected " + std::to_string(expected_bins) +
                         " frequency bins, got " + std::to_string(db_grid.rows));
  if (db_grid.cols == 0) throw DimensionError("shape_to_target: no frames");

  std::size_t half = params.out_freq_bins;          // 128
  std::size_t t_in = db_grid.cols;
  std::size_t t_out = params.out_frames;            // 128

  // Frequency: drop the Nyquist row, average bins (2r, 2r+1).
  Grid reduced;
  reduced.rows = half;
  reduced.cols = t_in;
  reduced.v.resize(half * t_in);
  for (std::size_t r = 0; r < half; ++r)
    for (std::size_t c = 0; c < t_in; ++c)
      reduced.at(r, c) = 0.5 * (db_grid.at(2 * r, c) + db_grid.at(2 * r + 1, c));

  Grid out;
  out.rows = half;
  out.cols = t_out;
  out.v.assign(half * t_out, params.db_floor);
  if (t_in >= t_out) {
    std::size_t start = (t_in - t_out) / 2;  // centered crop
    for (std::size_t r = 0; r < half; ++r)
      for (std::size_t c = 0; c < t_out; ++c) out.at(r, c) = reduced.at(r, start + c);
  } else {
    std::size_t pad_left = (t_out - t_in) / 2;  // extra pad column on the right when odd
    for (std::size_t r = 0; r < half; ++r)
      for (std::size_t c = 0; c < t_in; ++c) out.at(r, pad_left + c) = reduced.at(r, c);
  }
  return out;
}

Spectrogram minmax_normalize(const Grid& grid) {
  if (grid.rows != Spectrogram::kSide || grid.cols != Spectrogram::kSide)
    throw DimensionError("minmax_normalize: expected 128x128 grid, got " +
                         std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  double lo = grid.v[0], hi = grid.v[0];
  for (double x : grid.v) {
    if (!std::isfinite(x)) throw ValidationError("minmax_normalize: non-finite grid value");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi == lo)
    throw DegenerateSignalError("minmax_normalize: constant spectrogram carries no information");
  double inv = 1.0 / (hi - lo);
  Spectrogram s;
  s.v.resize(grid.v.size());
  for (std::size_t i = 0; i < grid.v.size(); ++i) s.v[i] = (grid.v[i] - lo) * inv;
  return s;
}

Spectrogram featurize(const AudioSignal& signal, const SpectrogramParams& params) {
  Grid mags = stft_magnitudes(signal, params);
  Grid db = magnitudes_to_db(mags, params.db_floor);
  Grid shaped = shape_to_target(db, params);
  return minmax_normalize(shaped);
}

namespace {
constexpr char kMagic[4] = {'S', 'P', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
}  // namespace

void save_spectrogram(const std::filesystem::path& path, const Spectrogram& s) {
  if (s.v.size() != Spectrogram::kSide * Spectrogram::kSide)
    throw DimensionError("save_spectrogram: grid is not 128x128");
  std::string out;
  out.reserve(8 + 4 * s.v.size());
  out.append(kMagic, 4);
  put_u32le(out, kVersion);
  for (double d : s.v) {
    float f = static_cast<float>(d);
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    put_u32le(out, bits);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

Spectrogram load_spectrogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t expected = 8 + 4 * Spectrogram::kSide * Spectrogram::kSide;
  if (bytes.size() != expected)
    throw IoError(path.string() + ": expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(path.string() + ": bad spectrogram magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint32_t version = get_u32le(p + 4);
  if (version != kVersion)
    throw FormatError(path.string() + ": unsupported spectrogram version " + std::to_string(version));
  Spectrogram s;
  s.v.resize(Spectrogram::kSide * Spectrogram::kSide);
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    std::uint32_t bits = get_u32le(p + 8 + 4 * i);
    s.v[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return s;
}

void save_pgm(const std::filesystem::path& path, const Spectrogram& s) {
  std::string out = "P5\n128 128\n255\n";
  // Row 0 of the grid is the lowest frequency; draw it at the bottom.
  for (std::size_t r = 0; r < Spectrogram::kSide; ++r) {
    for (std::size_t c = 0; c < Spectrogram::kSide; ++c) {
      double v = s.at(Spectrogram::kSide - 1 - r, c);
      int byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      out.push_back(static_cast<char>(byte));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

}  // namespace spoofdet
