#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "specembed/errors.hpp"
#include "specembed/frontend.hpp"
#include "specembed/wav.hpp"
#include "test_util.hpp"

using namespace specembed;
using specembed::testing::random_tensor;

namespace {

Waveform sine_wave(double freq_hz, double seconds, double amplitude = 0.5) {
  Waveform w;
  w.sample_rate = kSampleRate;
  const std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = amplitude * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) /
                                        static_cast<double>(kSampleRate));
  }
  return w;
}

}  // namespace

TEST_SUITE("frontend") {

TEST_CASE("one second of audio yields 98 frames before fitting") {
  Waveform w = sine_wave(440.0, 1.0);
  REQUIRE(w.samples.size() == 16000);
  Tensor spec = log_mel_spectrogram(w, {});
  CHECK(spec.dims() == std::vector<std::size_t>{40, 98});
}

TEST_CASE("digital silence hits the log floor everywhere") {
  Waveform w;
  w.sample_rate = kSampleRate;
  w.samples.assign(16000, 0.0);
  FrontendConfig cfg;
  Tensor spec = log_mel_spectrogram(w, cfg);
  const double floor_val = std::log(cfg.log_floor);
  for (std::size_t i = 0; i < spec.size(); ++i) CHECK(spec[i] == floor_val);
}

TEST_CASE("a 1 kHz tone peaks in the analytically nearest mel band") {
  FrontendConfig cfg;
  const auto centers = mel_band_centers_hz(cfg);
  std::size_t expected_band = 0;
  for (std::size_t m = 1; m < centers.size(); ++m) {
    if (std::abs(centers[m] - 1000.0) < std::abs(centers[expected_band] - 1000.0)) {
      expected_band = m;
    }
  }
  Tensor spec = log_mel_spectrogram(sine_wave(1000.0, 1.0), cfg);
  for (std::size_t t = 0; t < spec.dim(1); ++t) {
    std::size_t argmax = 0;
    for (std::size_t m = 1; m < kMelBands; ++m) {
      if (spec(m, t) > spec(argmax, t)) argmax = m;
    }
    CHECK(argmax == expected_band);
  }
}

TEST_CASE("frontend rejects wrong sample rates and too-short waves") {
  Waveform w = sine_wave(440.0, 1.0);
  w.sample_rate = 8000;
  CHECK_THROWS_AS(log_mel_spectrogram(w, {}), FormatError);

  Waveform tiny;
  tiny.sample_rate = kSampleRate;
  tiny.samples.assign(399, 0.1);
  CHECK_THROWS_AS(log_mel_spectrogram(tiny, {}), ParamError);
}

TEST_CASE("normalize: constant grid takes the guard path to all zeros") {
  Tensor spec({40, 10});
  spec.fill(3.7);
  Tensor out = normalize_spectrogram(spec);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("normalize: two-cell grid becomes [-1, 1]") {
  Tensor spec({1, 2}, {0.0, 2.0});
  Tensor out = normalize_spectrogram(spec);
  CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("normalize: random grid has mean 0 and variance 1 recomputed directly") {
  Rng rng(5);
  Tensor spec = random_tensor({40, 98}, rng, 2.5);
  Tensor out = normalize_spectrogram(spec);
  double mean = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) mean += out[i];
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) var += (out[i] - mean) * (out[i] - mean);
  var /= static_cast<double>(out.size());
  CHECK(std::abs(mean) < 1e-10);
  CHECK(std::abs(var - 1.0) < 1e-8);
}

TEST_CASE("fit_to_width pads and truncates equally with the right-side remainder") {
  Rng rng(6);
  Tensor t98 = random_tensor({2, 98}, rng);
  Tensor padded = fit_to_width(t98, 100);
  REQUIRE(padded.dims() == std::vector<std::size_t>{2, 100});
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(padded(r, 0) == 0.0);
    CHECK(padded(r, 99) == 0.0);
    for (std::size_t c = 0; c < 98; ++c) CHECK(padded(r, c + 1) == t98(r, c));
  }

  Tensor t120 = random_tensor({2, 120}, rng);
  Tensor cut = fit_to_width(t120, 100);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 100; ++c) CHECK(cut(r, c) == t120(r, c + 10));
  }

  Tensor t99 = random_tensor({2, 99}, rng);
  Tensor pad1 = fit_to_width(t99, 100);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(pad1(r, 0) == t99(r, 0));  // zero pad goes to the right
    CHECK(pad1(r, 99) == 0.0);
  }
}

TEST_CASE("fit_to_width is idempotent at the target width") {
  Rng rng(7);
  for (std::size_t width : {40UL, 99UL, 100UL, 101UL, 150UL}) {
    Tensor t = random_tensor({3, width}, rng);
    Tensor once = fit_to_width(t, 100);
    CHECK(fit_to_width(once, 100) == once);
  }
}

TEST_CASE("mel filter rows sum positive and adjacent triangles overlap") {
  for (std::size_t fft : {512UL, 1024UL}) {
    for (double lo : {0.0, 20.0, 50.0}) {
      for (double hi : {7600.0, 8000.0}) {
        FrontendConfig cfg;
        cfg.fft_size = fft;
        cfg.mel_low_hz = lo;
        cfg.mel_high_hz = hi;
        const auto bank = mel_filterbank(cfg);
        REQUIRE(bank.size() == kMelBands);
        for (std::size_t m = 0; m < kMelBands; ++m) {
          double sum = 0.0;
          for (double v : bank[m]) sum += v;
          CHECK(sum > 0.0);
          if (m + 1 < kMelBands) {
            double overlap = 0.0;
            for (std::size_t k = 0; k < bank[m].size(); ++k) {
              overlap += bank[m][k] * bank[m + 1][k];
            }
            CHECK(overlap > 0.0);
          }
        }
      }
    }
  }
}

TEST_CASE("scaling a waveform up raises every above-floor log energy") {
  FrontendConfig cfg;
  Waveform w = sine_wave(700.0, 0.5, 0.1);
  Waveform louder = w;
  for (double& s : louder.samples) s *= 3.0;
  Tensor a = log_mel_spectrogram(w, cfg);
  Tensor b = log_mel_spectrogram(louder, cfg);
  const double floor_val = std::log(cfg.log_floor);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > floor_val && b[i] > floor_val) CHECK(b[i] > a[i]);
  }
}

TEST_CASE("one spectrogram column matches a naive DFT oracle") {
  // independent reconstruction of frame 0: Hamming window, zero-padded
  // naive DFT power spectrum, filterbank energies, log floor
  FrontendConfig cfg;
  Rng rng(29);
  Waveform w;
  w.sample_rate = kSampleRate;
  w.samples.resize(600);
  for (double& s : w.samples) s = 0.25 * rng.gaussian();

  Tensor spec = log_mel_spectrogram(w, cfg);
  REQUIRE(spec.dim(1) == (600 - kWindowSamples) / kHopSamples + 1);

  const std::size_t n_bins = cfg.fft_size / 2 + 1;
  std::vector<double> windowed(cfg.fft_size, 0.0);
  for (std::size_t i = 0; i < kWindowSamples; ++i) {
    const double ham = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                              static_cast<double>(kWindowSamples - 1));
    windowed[i] = w.samples[i] * ham;
  }
  std::vector<double> power(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < cfg.fft_size; ++n) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(n) /
                         static_cast<double>(cfg.fft_size);
      re += windowed[n] * std::cos(ang);
      im += windowed[n] * std::sin(ang);
    }
    power[k] = re * re + im * im;
  }
  const auto bank = mel_filterbank(cfg);
  for (std::size_t m = 0; m < kMelBands; ++m) {
    double energy = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) energy += bank[m][k] * power[k];
    const double expected = std::log(std::max(energy, cfg.log_floor));
    CHECK(spec(m, 0) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("pipeline is deterministic on identical bytes") {
  Waveform w = sine_wave(523.25, 0.8, 0.3);
  Tensor a = word_spectrogram(w, {});
  Tensor b = word_spectrogram(w, {});
  CHECK(a == b);
  CHECK(a.dims() == std::vector<std::size_t>{40, 100});
}

TEST_CASE("wav round trips and rejects other encodings") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "specembed_test_wav";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Waveform w = sine_wave(440.0, 0.2, 0.4);
  write_wav(dir / "ok.wav", w);
  Waveform back = read_wav(dir / "ok.wav");
  CHECK(back.sample_rate == kSampleRate);
  REQUIRE(back.samples.size() == w.samples.size());
  // 16-bit quantization error is at most half a step
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(std::abs(back.samples[i] - w.samples[i]) <= 0.5 / 32768.0 + 1e-12);
  }
  // re-reading and re-writing is byte stable
  write_wav(dir / "ok2.wav", back);
  Waveform again = read_wav(dir / "ok2.wav");
  CHECK(again.samples == back.samples);

  std::ofstream junk(dir / "bad.wav", std::ios::binary);
  junk << "not a wav at all";
  junk.close();
  CHECK_THROWS_AS(read_wav(dir / "bad.wav"), FormatError);
}

}  // TEST_SUITE
