#include "spoofdet/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "spoofdet/error.hpp"

namespace spoofdet {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

AudioSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t off = 12;
  while (off + 8 <= n) {
    const unsigned char* chunk = p + off;
    std::uint32_t chunk_len = read_u32(chunk + 4);
    if (off + 8 + chunk_len > n)
      throw IoError(path.string() + ": truncated chunk '" + std::string(reinterpret_cast<const char*>(chunk), 4) + "'");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw IoError(path.string() + ": fmt chunk too small");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      sample_rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = chunk_len;
    }
    off += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !data) throw IoError(path.string() + ": missing fmt or data chunk");
  if (format != 1) throw FormatError(path.string() + ": only PCM (format 1) supported, got " + std::to_string(format));
  if (channels != 1) throw FormatError(path.string() + ": only mono supported, got " + std::to_string(channels) + " channels");
  if (bits != 16) throw FormatError(path.string() + ": only 16-bit samples supported, got " + std::to_string(bits));
  if (sample_rate == 0) throw FormatError(path.string() + ": zero sample rate");

  AudioSignal signal;
  signal.sample_rate = sample_rate;
  std::size_t count = data_len / 2;
  signal.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto raw = static_cast<std::int16_t>(read_u16(data + 2 * i));
    double v = static_cast<double>(raw) / 32768.0;
    signal.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return signal;
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
  if (signal.sample_rate == 0) throw ValidationError("write_wav: zero sample rate");
  std::uint32_t data_len = static_cast<std::uint32_t>(signal.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, signal.sample_rate);
  put_u32(out, signal.sample_rate * 2);  // byte rate
  put_u16(out, 2);                       // block align
  put_u16(out, 16);                      // bits per sample
  out += "data";
  put_u32(out, data_len);
  for (double v : signal.samples) {
    if (!std::isfinite(v)) throw ValidationError("write_wav: non-finite sample");
    double clamped = std::clamp(v, -1.0, 1.0);
    long q = std::lround(clamped * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

}  // namespace spoofdet
