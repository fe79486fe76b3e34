#include "specembed/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "specembed/errors.hpp"

namespace specembed {

namespace {

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
  return v;
}

std::uint16_t get_u16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<std::uint8_t>(p[0]) |
                                    (static_cast<std::uint8_t>(p[1]) << 8));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const char* data_ptr = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = bytes.data() + pos;
    const std::uint32_t chunk_len = get_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + chunk_len > bytes.size()) {
      throw FormatError(name + ": truncated chunk '" + std::string(id, 4) + "'");
    }
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw FormatError(name + ": fmt chunk too short");
      const char* f = bytes.data() + pos;
      audio_format = get_u16(f);
      channels = get_u16(f + 2);
      sample_rate = get_u32(f + 4);
      bits = get_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + pos;
      data_len = chunk_len;
    }
    pos += chunk_len + (chunk_len % 2);  // chunks are word-aligned
  }

  if (!have_fmt || !data_ptr) throw FormatError(name + ": missing fmt or data chunk");
  if (audio_format != 1) throw FormatError(name + ": not PCM (format tag " + std::to_string(audio_format) + ")");
  if (channels != 1) throw FormatError(name + ": expected mono, got " + std::to_string(channels) + " channels");
  if (bits != 16) throw FormatError(name + ": expected 16-bit samples, got " + std::to_string(bits));
  if (data_len % 2 != 0) throw FormatError(name + ": odd data chunk length");

  Waveform wave;
  wave.sample_rate = sample_rate;
  wave.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    const std::int16_t s = static_cast<std::int16_t>(get_u16(data_ptr + 2 * i));
    wave.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const std::uint32_t data_len = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::string buf;
  buf.reserve(44 + data_len);
  buf.append("RIFF", 4);
  put_u32(buf, 36 + data_len);
  buf.append("WAVE", 4);
  buf.append("fmt ", 4);
  put_u32(buf, 16);
  put_u16(buf, 1);  // PCM
  put_u16(buf, 1);  // mono
  put_u32(buf, wave.sample_rate);
  put_u32(buf, wave.sample_rate * 2);  // byte rate
  put_u16(buf, 2);                     // block align
  put_u16(buf, 16);                    // bits per sample
  buf.append("data", 4);
  put_u32(buf, data_len);
  for (double s : wave.samples) {
    const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
    const auto q = static_cast<std::int16_t>(std::lrint(clamped * 32768.0));
    put_u16(buf, static_cast<std::uint16_t>(q));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace specembed
