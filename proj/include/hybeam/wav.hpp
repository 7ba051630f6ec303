#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hybeam/common.hpp"
#include "hybeam/stft.hpp"

namespace hybeam {

namespace detail {

inline void wav_put_u32(std::string& s, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  s.append(b, 4);
}

inline void wav_put_u16(std::string& s, uint16_t v) {
  char b[2];
  std::memcpy(b, &v, 2);
  s.append(b, 2);
}

}  // namespace detail

// Interleaved 32-bit float RIFF/WAVE. Doubles are narrowed per sample; the
// narrowing is the only loss, so float-representable data round-trips bit
// exactly.
inline void write_wav(const AudioBuffer& audio, const std::string& path) {
  audio.check_rectangular();
  if (audio.channels() == 0 || audio.length() == 0)
    throw EmptyInput("write_wav: no samples");
  if (audio.sample_rate <= 0) throw ConfigError("write_wav: sample rate must be positive");

  const uint16_t q = uint16_t(audio.channels());
  const uint32_t n = uint32_t(audio.length());
  const uint32_t data_bytes = n * q * 4;

  std::string out;
  out.reserve(58 + data_bytes);
  out += "RIFF";
  detail::wav_put_u32(out, 4 + 24 + 12 + 8 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  detail::wav_put_u32(out, 16);
  detail::wav_put_u16(out, 3);  // IEEE float
  detail::wav_put_u16(out, q);
  detail::wav_put_u32(out, uint32_t(audio.sample_rate));
  detail::wav_put_u32(out, uint32_t(audio.sample_rate) * q * 4);
  detail::wav_put_u16(out, uint16_t(q * 4));
  detail::wav_put_u16(out, 32);
  out += "fact";
  detail::wav_put_u32(out, 4);
  detail::wav_put_u32(out, n);
  out += "data";
  detail::wav_put_u32(out, data_bytes);
  for (uint32_t i = 0; i < n; ++i)
    for (int c = 0; c < q; ++c) {
      float v = float(audio.samples[c][i]);
      char b[4];
      std::memcpy(b, &v, 4);
      out.append(b, 4);
    }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FileError("write_wav: cannot open " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw FileError("write_wav: short write to " + path);
}

// Reads float32 or PCM16 WAVs; unknown chunks are skipped. PCM16 scales by
// 1/32768.
inline AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("read_wav: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), {});

  auto u32 = [&](size_t at) {
    uint32_t v;
    std::memcpy(&v, bytes.data() + at, 4);
    return v;
  };
  auto u16 = [&](size_t at) {
    uint16_t v;
    std::memcpy(&v, bytes.data() + at, 2);
    return v;
  };

  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0)
    throw FormatError("read_wav: not a RIFF/WAVE file: " + path);

  uint16_t tag = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t data_at = 0, data_len = 0;

  size_t at = 12;
  while (at + 8 <= bytes.size()) {
    std::string id = bytes.substr(at, 4);
    uint32_t len = u32(at + 4);
    size_t body = at + 8;
    if (body + len > bytes.size())
      throw FormatError("read_wav: chunk '" + id + "' overruns the file");
    if (id == "fmt ") {
      if (len < 16) throw FormatError("read_wav: fmt chunk too short");
      tag = u16(body);
      channels = u16(body + 2);
      rate = u32(body + 4);
      bits = u16(body + 14);
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_len = len;
    }
    at = body + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_at == 0)
    throw FormatError("read_wav: missing fmt or data chunk in " + path);
  if (channels == 0 || rate == 0) throw FormatError("read_wav: degenerate fmt chunk");

  const bool is_float = tag == 3 && bits == 32;
  const bool is_pcm16 = tag == 1 && bits == 16;
  if (!is_float && !is_pcm16)
    throw FormatError("read_wav: unsupported encoding (format tag " + std::to_string(tag) +
                      ", " + std::to_string(bits) + " bit); need float32 or PCM16");

  const size_t bytes_per = is_float ? 4 : 2;
  const size_t frame_bytes = bytes_per * channels;
  if (data_len % frame_bytes != 0)
    throw FormatError("read_wav: data chunk is not a whole number of frames");
  const size_t n = data_len / frame_bytes;

  AudioBuffer out;
  out.sample_rate = rate;
  out.samples.assign(channels, std::vector<double>(n));
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < channels; ++c) {
      size_t p = data_at + (i * channels + c) * bytes_per;
      if (is_float) {
        float v;
        std::memcpy(&v, bytes.data() + p, 4);
        out.samples[c][i] = v;
      } else {
        int16_t v;
        std::memcpy(&v, bytes.data() + p, 2);
        out.samples[c][i] = v / 32768.0;
      }
    }
  return out;
}

}  // namespace hybeam
