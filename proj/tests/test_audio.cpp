#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "spoofdet/audio.hpp"
#include "spoofdet/error.hpp"
#include "spoofdet/rng.hpp"

using namespace spoofdet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "spoofdet_audio_test";
  fs::create_directories(dir);
  return dir;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

// Hand-assembled RIFF/WAVE container, the independent oracle for read_wav.
std::vector<unsigned char> build_wav(const std::vector<std::int16_t>& samples,
                                     std::uint16_t channels = 1, std::uint16_t bits = 16,
                                     std::uint16_t format = 1, std::uint32_t rate = 16000) {
  std::vector<unsigned char> b;
  std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, format);
  put_u16(b, channels);
  put_u32(b, rate);
  put_u32(b, rate * channels * bits / 8);
  put_u16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(b, bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_len);
  for (std::int16_t s : samples) put_u16(b, static_cast<std::uint16_t>(s));
  return b;
}

fs::path write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  return path;
}

}  // namespace

TEST_CASE("16-bit samples scale by 1/32768") {
  auto dir = scratch_dir();
  auto path = write_bytes(dir / "scale.wav", build_wav({0, 16384, -32768, 32767}));
  AudioSignal s = read_wav(path);
  REQUIRE(s.samples.size() == 4);
  CHECK(s.sample_rate == 16000);
  CHECK(s.samples[0] == 0.0);
  CHECK(s.samples[1] == 0.5);
  CHECK(s.samples[2] == -1.0);
  CHECK(s.samples[3] == doctest::Approx(32767.0 / 32768.0));
}

TEST_CASE("write then read stays within half a quantization step") {
  auto dir = scratch_dir();
  Rng rng(123);
  AudioSignal original;
  original.sample_rate = 8000;
  original.samples.resize(4096);
  for (double& v : original.samples) v = rng.next_uniform(-1.0, 1.0);

  auto path = dir / "roundtrip.wav";
  write_wav(path, original);
  AudioSignal back = read_wav(path);
  REQUIRE(back.samples.size() == original.samples.size());
  CHECK(back.sample_rate == 8000);
  for (std::size_t i = 0; i < back.samples.size(); ++i)
    CHECK(std::abs(back.samples[i] - original.samples[i]) <= 1.0 / 65536.0);
}

TEST_CASE("writing clamps out-of-range and rejects non-finite samples") {
  auto dir = scratch_dir();
  AudioSignal loud;
  loud.samples = {2.0, -3.5, 1.0};
  auto path = dir / "clamped.wav";
  write_wav(path, loud);
  AudioSignal back = read_wav(path);
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == -1.0);

  AudioSignal bad;
  bad.samples = {0.0, std::nan("")};
  CHECK_THROWS_AS(write_wav(dir / "bad.wav", bad), ValidationError);
}

TEST_CASE("stereo is a format error") {
  auto dir = scratch_dir();
  auto path = write_bytes(dir / "stereo.wav", build_wav({0, 0, 0, 0}, 2));
  CHECK_THROWS_AS(read_wav(path), FormatError);
}

TEST_CASE("non-PCM and non-16-bit flavors are format errors") {
  auto dir = scratch_dir();
  auto f32 = write_bytes(dir / "float.wav", build_wav({0, 0}, 1, 16, 3));
  CHECK_THROWS_AS(read_wav(f32), FormatError);
  auto b8 = write_bytes(dir / "8bit.wav", build_wav({0, 0}, 1, 8));
  CHECK_THROWS_AS(read_wav(b8), FormatError);
}

TEST_CASE("malformed containers are I/O or format errors") {
  auto dir = scratch_dir();

  auto good = build_wav({1, 2, 3});
  auto truncated = good;
  truncated.resize(20);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "trunc.wav", truncated)), IoError);

  auto not_riff = good;
  not_riff[0] = 'X';
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "notriff.wav", not_riff)), FormatError);

  auto short_data = good;
  short_data.resize(short_data.size() - 2);  // data chunk promises more
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "shortdata.wav", short_data)), IoError);

  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
}

TEST_CASE("error messages name the offending file") {
  auto dir = scratch_dir();
  auto path = write_bytes(dir / "stereo2.wav", build_wav({0, 0}, 2));
  try {
    read_wav(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("stereo2.wav") != std::string::npos);
  }
}
