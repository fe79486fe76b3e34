#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace specembed {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1)
  std::uint32_t sample_rate = 0;
};

// Reads canonical RIFF/WAVE: PCM, 16-bit signed little-endian, mono.
// Anything else raises FormatError.
Waveform read_wav(const std::filesystem::path& path);

// Writes the same canonical encoding; samples clamp to [-1, 1).
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace specembed
