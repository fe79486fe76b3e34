#pragma once

#include <cstdint>
#include <vector>

#include "specembed/tensor.hpp"
#include "specembed/wav.hpp"

namespace specembed {

// Word spectrograms are 40 mel bands tall; a fitted spectrogram is 100
// frames (1 second) wide. Frames use a 25 ms Hamming window with a 10 ms
// shift at the only supported sample rate, 16 kHz.
constexpr std::uint32_t kSampleRate = 16000;
constexpr std::size_t kMelBands = 40;
constexpr std::size_t kWindowSamples = 400;  // 25 ms
constexpr std::size_t kHopSamples = 160;     // 10 ms

struct FrontendConfig {
  std::size_t fft_size = 512;    // must be >= window length and a power of two
  double mel_low_hz = 20.0;
  double mel_high_hz = 8000.0;   // <= sample_rate / 2
  double log_floor = 1e-10;
  std::size_t target_frames = 100;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters equally spaced on the mel scale, one weight row per
// band over the fft_size/2 + 1 power-spectrum bins.
std::vector<std::vector<double>> mel_filterbank(const FrontendConfig& cfg);

// Center frequency of each band in Hz; band b peaks at mel point b+1.
std::vector<double> mel_band_centers_hz(const FrontendConfig& cfg);

// Raw log-mel energies, 40 x T with T = floor((N - 400) / 160) + 1.
// Per frame: Hamming window -> power spectrum -> mel filter energies ->
// log(max(energy, log_floor)).
Tensor log_mel_spectrogram(const Waveform& wave, const FrontendConfig& cfg);

// Subtracts the scalar mean over all cells, then divides by the scalar
// population standard deviation (skipping the division when std < 1e-8).
Tensor normalize_spectrogram(const Tensor& spec);

// Pads with zero columns or truncates columns, split equally between the two
// sides (the extra column goes to the right).
Tensor fit_to_width(const Tensor& spec, std::size_t target = 100);

// Full chain: log_mel_spectrogram -> normalize -> fit_to_width.
Tensor word_spectrogram(const Waveform& wave, const FrontendConfig& cfg);

}  // namespace specembed
