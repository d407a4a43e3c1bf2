#include "picknet/dsp/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "picknet/error.hpp"

namespace picknet::dsp {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

}  // namespace

void validate(const AudioClip& clip) {
  require(clip.sample_rate > 0, ErrorCode::kInvalidInput, "sample rate must be positive");
  for (double s : clip.samples)
    require(std::isfinite(s), ErrorCode::kInvalidInput, "audio contains non-finite samples");
}

double mean_square(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

AudioClip read_wav(const std::filesystem::path& path, std::optional<int> expected_rate) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const std::string name = path.string();
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorCode::kInvalidInput, name + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const auto len = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      require(avail >= 16, ErrorCode::kInvalidInput, name + ": short fmt chunk");
      format = read_le<std::uint16_t>(chunk + 8);
      channels = read_le<std::uint16_t>(chunk + 10);
      rate = read_le<std::uint32_t>(chunk + 12);
      bits = read_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible && avail >= 26)
        format = read_le<std::uint16_t>(chunk + 8 + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1U);
  }
  require(have_fmt && data != nullptr, ErrorCode::kInvalidInput, name + ": missing fmt or data chunk");
  require(channels == 1, ErrorCode::kInvalidInput, name + ": only mono files are supported");
  require(rate > 0, ErrorCode::kInvalidInput, name + ": zero sample rate");
  if (expected_rate)
    require(static_cast<int>(rate) == *expected_rate, ErrorCode::kInvalidInput,
            name + ": sample rate " + std::to_string(rate) + " != expected " +
                std::to_string(*expected_rate));

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_len / 2;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      clip.samples[i] = read_le<std::int16_t>(data + 2 * i) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_len / 4;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) clip.samples[i] = read_le<float>(data + 4 * i);
  } else {
    fail(ErrorCode::kInvalidInput, name + ": unsupported encoding (format " +
                                       std::to_string(format) + ", " + std::to_string(bits) +
                                       " bits)");
  }
  validate(clip);
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
  validate(clip);
  const bool is_float = encoding == WavEncoding::kFloat32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint32_t bytes_per_sample = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(clip.samples.size() * bytes_per_sample);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_le<std::uint32_t>(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, is_float ? kFormatFloat : kFormatPcm);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * bytes_per_sample);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(bytes_per_sample));
  put_le<std::uint16_t>(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_le<std::uint32_t>(out, data_len);
  for (double s : clip.samples) {
    if (is_float) {
      put_le<float>(out, static_cast<float>(s));
    } else {
      // same 1/32768 scale as the reader; +1.0 saturates at 32767
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put_le<std::int16_t>(out, static_cast<std::int16_t>(scaled));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorCode::kIo, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  require(f.good(), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace picknet::dsp
