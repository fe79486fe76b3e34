#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specembed/align.hpp"
#include "specembed/word_cnn.hpp"

namespace specembed {

// Planted-correspondence dataset: each concept gets unit-norm prototype
// vectors in both modalities (pairwise cosine < 0.5 by rejection); every
// caption word's concept is guaranteed to appear among its image's regions,
// so retrieval and alignment quality are checkable against ground truth.
// Each image draws words_per_caption salient concepts; the remaining
// regions repeat those same concepts, the way overlapping detector
// proposals cover the same few objects, so an image is identified by its
// salient set alone.
struct SynthConfig {
  std::size_t n_concepts = 10;
  std::size_t d_image = 64;
  std::size_t d_word = 32;
  std::size_t regions_per_image = kRegionsPerImage;
  std::size_t words_per_caption = 4;
  double noise_sigma = 0.05;
  std::size_t n_images = 300;
  std::size_t captions_per_image = 5;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::map<std::string, std::vector<int>> image_region_concepts;
  std::map<std::string, std::vector<int>> caption_word_concepts;
};

struct SynthDataset {
  std::vector<ImageRecord> images;
  std::vector<CaptionRecord> captions;
  GroundTruth truth;
};

SynthDataset generate(const SynthConfig& cfg);

// For each caption (dataset order), for each word: the region indices of the
// parent image sharing the word's concept. Nonempty by construction.
using OracleSets = std::vector<std::vector<std::vector<std::size_t>>>;
OracleSets oracle_alignment(const SynthDataset& dataset);

// Labeled tone-pattern grids standing in for word spectrogram classes: each
// class is a fixed additive mix of band-limited tones, each example adds
// Gaussian noise and is then mean/variance normalized.
struct ToneGridConfig {
  std::size_t n_classes = 50;
  std::size_t per_class = 5;
  std::size_t bands = 40;
  std::size_t frames = 100;
  std::size_t tones_per_class = 3;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

std::vector<LabeledSpectrogram> generate_tone_spectrograms(const ToneGridConfig& cfg);

}  // namespace specembed
