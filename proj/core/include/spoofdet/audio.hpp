#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace spoofdet {

struct AudioSignal {
  std::vector<double> samples;  // clamped to [-1,1] on ingestion
  std::uint32_t sample_rate = 16000;
};

// 16-bit PCM mono RIFF/WAVE only; other flavors raise a format error,
// truncated or malformed containers an I/O error. Samples scale by 1/32768.
AudioSignal read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono; samples are clamped to [-1,1] and quantized with
// round-to-nearest at scale 32768, so a read-back differs from the original
// by at most 1/65536 per sample.
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

}  // namespace spoofdet
