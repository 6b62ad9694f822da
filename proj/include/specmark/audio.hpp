#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "specmark/errors.hpp"

namespace specmark {

struct Waveform {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 22050;
};

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// PCM16 mono little-endian RIFF only. Scale 32768 both ways so that a
// read -> write cycle is byte-stable and write -> read stays within half
// an LSB of the original sample.
inline void write_wav(const std::string& path, const Waveform& w) {
  if (w.samples.empty()) throw InputTooShort("write_wav: no samples");
  if (w.sample_rate <= 0) throw InvalidConfig("write_wav: bad sample rate");

  std::string out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate * 2));
  detail::put_u16(out, 2);   // block align
  detail::put_u16(out, 16);  // bits per sample
  out += "data";
  detail::put_u32(out, data_bytes);
  for (double x : w.samples) {
    long v = std::lround(x * 32768.0);
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("write_wav: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write_wav: short write to " + path);
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("read_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError("read_wav: not a RIFF/WAVE file");

  // Chunk walk; fmt must precede data.
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, codec = 0;
  std::uint32_t rate = 0;
  Waveform w;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    const std::uint32_t len = detail::get_u32(buf.data() + pos + 4);
    pos += 8;
    if (pos + len > buf.size()) throw FormatError("read_wav: truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError("read_wav: fmt chunk too small");
      codec = detail::get_u16(buf.data() + pos);
      channels = detail::get_u16(buf.data() + pos + 2);
      rate = detail::get_u32(buf.data() + pos + 4);
      bits = detail::get_u16(buf.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("read_wav: data chunk before fmt");
      if (channels != 1) throw Unsupported("read_wav: only mono supported");
      if (codec != 1 || bits != 16) throw Unsupported("read_wav: only PCM16 supported");
      if (rate == 0) throw FormatError("read_wav: zero sample rate");
      const std::size_t n = len / 2;
      if (n == 0) throw FormatError("read_wav: empty data chunk");
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t v =
            static_cast<std::int16_t>(detail::get_u16(buf.data() + pos + 2 * i));
        w.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return w;
    }
    pos += len + (len & 1u);  // chunks are word-aligned
  }
  throw FormatError("read_wav: no data chunk");
}

inline double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace specmark
