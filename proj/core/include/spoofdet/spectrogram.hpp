#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "spoofdet/audio.hpp"

namespace spoofdet {

struct SpectrogramParams {
  std::size_t frame_len = 512;
  std::size_t overlap = 128;
  std::size_t fft_size = 512;
  double db_floor = -80.0;  // dB relative to the signal's maximum magnitude
  std::size_t out_freq_bins = 128;
  std::size_t out_frames = 128;

  std::size_t hop() const { return frame_len - overlap; }
  void validate() const;  // overlap < frame_len, fft_size == frame_len, out dims 128
};

// Row-major rows×cols grid of doubles; intermediate pipeline product.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

// Final 128×128 feature: rows = frequency low→high, cols = time early→late,
// values min-max normalized to [0,1].
struct Spectrogram {
  static constexpr std::size_t kSide = 128;
  std::vector<double> v;  // row-major, 16384 values

  double at(std::size_t r, std::size_t c) const { return v[r * kSide + c]; }
};

// Hann-windowed frames of length frame_len starting every hop() samples;
// count = floor((N-frame_len)/hop())+1. Too-short signals are an error.
std::vector<std::vector<double>> frame_signal(const AudioSignal& signal,
                                              const SpectrogramParams& params = {});

// |FFT| of every frame: (fft_size/2+1) rows × frame count columns.
Grid stft_magnitudes(const AudioSignal& signal, const SpectrogramParams& params = {});

// 20·log10(m/global_max) clamped below at db_floor; all-zero input is a
// degenerate-signal error.
Grid magnitudes_to_db(const Grid& magnitudes, double db_floor);

// 257×T -> 128×128: drop the Nyquist row, average adjacent bin pairs;
// center-crop or db_floor-pad the time axis (extra pad column on the right).
Grid shape_to_target(const Grid& db_grid, const SpectrogramParams& params = {});

// (v-min)/(max-min); a constant grid is a degenerate-signal error.
Spectrogram minmax_normalize(const Grid& grid);

// Full pipeline; deterministic in the input bytes.
Spectrogram featurize(const AudioSignal& signal, const SpectrogramParams& params = {});

// Raw container: magic "SPGM", little-endian u32 version (=1), then 16,384
// little-endian 32-bit floats, row-major.
void save_spectrogram(const std::filesystem::path& path, const Spectrogram& s);
Spectrogram load_spectrogram(const std::filesystem::path& path);

// 8-bit binary PGM (P5) for eyeballing features.
void save_pgm(const std::filesystem::path& path, const Spectrogram& s);

}  // namespace spoofdet
