#include "specembed/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "specembed/errors.hpp"

namespace specembed {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void validate_config(const FrontendConfig& cfg) {
  if (!is_power_of_two(cfg.fft_size)) throw ParamError("fft_size must be a power of two");
  if (cfg.fft_size < kWindowSamples) {
    throw ParamError("fft_size must be >= window length (" +
                     std::to_string(kWindowSamples) + " samples)");
  }
  if (!(cfg.mel_low_hz >= 0.0 && cfg.mel_low_hz < cfg.mel_high_hz &&
        cfg.mel_high_hz <= kSampleRate / 2.0)) {
    throw ParamError("mel range must satisfy 0 <= low < high <= sample_rate/2");
  }
  if (cfg.target_frames < 1) throw ParamError("target_frames must be >= 1");
}

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<double> hamming_window(std::size_t len) {
  std::vector<double> w(len);
  for (std::size_t i = 0; i < len; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                  static_cast<double>(len - 1));
  }
  return w;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(const FrontendConfig& cfg) {
  validate_config(cfg);
  const std::size_t n_bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.mel_low_hz);
  const double mel_hi = hz_to_mel(cfg.mel_high_hz);
  const double mel_step = (mel_hi - mel_lo) / static_cast<double>(kMelBands + 1);

  std::vector<double> edges(kMelBands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + static_cast<double>(i) * mel_step);
  }

  std::vector<std::vector<double>> bank(kMelBands, std::vector<double>(n_bins, 0.0));
  const double bin_hz = static_cast<double>(kSampleRate) / static_cast<double>(cfg.fft_size);
  for (std::size_t m = 0; m < kMelBands; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > left && f < center) {
        w = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        w = (right - f) / (right - center);
      }
      bank[m][k] = w;
    }
  }
  return bank;
}

std::vector<double> mel_band_centers_hz(const FrontendConfig& cfg) {
  validate_config(cfg);
  const double mel_lo = hz_to_mel(cfg.mel_low_hz);
  const double mel_hi = hz_to_mel(cfg.mel_high_hz);
  const double mel_step = (mel_hi - mel_lo) / static_cast<double>(kMelBands + 1);
  std::vector<double> centers(kMelBands);
  for (std::size_t m = 0; m < kMelBands; ++m) {
    centers[m] = mel_to_hz(mel_lo + static_cast<double>(m + 1) * mel_step);
  }
  return centers;
}

Tensor log_mel_spectrogram(const Waveform& wave, const FrontendConfig& cfg) {
  validate_config(cfg);
  if (wave.sample_rate != kSampleRate) {
    throw FormatError("unsupported sample rate " + std::to_string(wave.sample_rate) +
                      " (only 16000 Hz)");
  }
  if (wave.samples.size() < kWindowSamples) {
    throw ParamError("waveform too short: " + std::to_string(wave.samples.size()) +
                     " samples, need at least " + std::to_string(kWindowSamples));
  }

  const std::size_t n_frames = (wave.samples.size() - kWindowSamples) / kHopSamples + 1;
  const std::size_t n_bins = cfg.fft_size / 2 + 1;
  const auto window = hamming_window(kWindowSamples);
  const auto bank = mel_filterbank(cfg);

  Tensor spec({kMelBands, n_frames});
  std::vector<std::complex<double>> buf(cfg.fft_size);
  std::vector<double> power(n_bins);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* frame = wave.samples.data() + t * kHopSamples;
    for (std::size_t i = 0; i < kWindowSamples; ++i) buf[i] = frame[i] * window[i];
    for (std::size_t i = kWindowSamples; i < cfg.fft_size; ++i) buf[i] = 0.0;
    fft(buf);
    for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < kMelBands; ++m) {
      double energy = 0.0;
      const auto& row = bank[m];
      for (std::size_t k = 0; k < n_bins; ++k) energy += row[k] * power[k];
      spec(m, t) = std::log(std::max(energy, cfg.log_floor));
    }
  }
  return spec;
}

Tensor normalize_spectrogram(const Tensor& spec) {
  require_rank(spec, 2, "normalize_spectrogram input");
  const std::size_t n = spec.size();
  double lo = spec[0], hi = spec[0];
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, spec[i]);
    hi = std::max(hi, spec[i]);
  }
  if (lo == hi) return Tensor(spec.dims());  // constant grid: exact zeros

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += spec[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = spec[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double std_dev = std::sqrt(var);
  const double scale = std_dev < 1e-8 ? 1.0 : 1.0 / std_dev;

  Tensor out(spec.dims());
  for (std::size_t i = 0; i < n; ++i) out[i] = (spec[i] - mean) * scale;
  return out;
}

Tensor fit_to_width(const Tensor& spec, std::size_t target) {
  require_rank(spec, 2, "fit_to_width input");
  if (target < 1) throw ParamError("fit_to_width target must be >= 1");
  const std::size_t rows = spec.dim(0), cols = spec.dim(1);
  if (cols == target) return spec;

  Tensor out({rows, target});
  if (cols < target) {
    const std::size_t pad_left = (target - cols) / 2;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out(r, pad_left + c) = spec(r, c);
    }
  } else {
    const std::size_t cut_left = (cols - target) / 2;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < target; ++c) out(r, c) = spec(r, cut_left + c);
    }
  }
  return out;
}

Tensor word_spectrogram(const Waveform& wave, const FrontendConfig& cfg) {
  return fit_to_width(normalize_spectrogram(log_mel_spectrogram(wave, cfg)), cfg.target_frames);
}

}  // namespace specembed
