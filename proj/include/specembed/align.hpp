#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specembed/optim.hpp"
#include "specembed/rng.hpp"
#include "specembed/tensor.hpp"

namespace specembed {

constexpr std::size_t kRegionsPerImage = 20;

// One image: identifier plus its fixed block of 20 region feature vectors.
struct ImageRecord {
  std::string image_id;
  Tensor regions;  // 20 x d_image
};

// One caption: ordered word feature vectors (N_w x d_word) once embedded;
// before embedding the words may exist only as spectrogram files.
struct CaptionRecord {
  std::string caption_id;
  std::string image_id;
  Tensor words;  // N_w x d_word, empty until word features exist
  std::vector<std::string> spectrogram_paths;
  std::vector<std::string> word_texts;
};

// The learned maps into the h-dimensional joint space: an affine transform
// for image regions (y = W_m v + b_m) and a rectified affine transform for
// word vectors (x = max(0, W_d w + b_d)).
struct AlignParams {
  std::size_t h = 0, d_image = 0, d_word = 0;
  Tensor region_weight, region_bias;  // W_m (h x d_image), b_m (h)
  Tensor word_weight, word_bias;      // W_d (h x d_word),  b_d (h)

  static AlignParams init(std::size_t h, std::size_t d_image, std::size_t d_word,
                          std::uint64_t seed);
  static AlignParams zeros(std::size_t h, std::size_t d_image, std::size_t d_word);

  ParamRefs param_refs();
};

Tensor embed_region(const Tensor& v, const AlignParams& params);

// Optionally unit-normalizes w first (skipped for the zero vector), then
// applies the rectified affine map; the result is elementwise >= 0.
Tensor embed_word_vec(const Tensor& w, const AlignParams& params, bool normalize = true);

// Batched row-wise variants.
Tensor embed_regions(const Tensor& regions, const AlignParams& params);          // R x h
Tensor embed_caption_words(const Tensor& words, const AlignParams& params,
                           bool normalize = true);                               // N x h

// The image-caption score over embedded fragments: each word takes its max
// inner product across the image's regions, thresholded below at 0, and the
// caption score is the sum over words. Single source of truth for scoring;
// retrieval reuses it on precomputed embeddings.
double fragment_similarity(const Tensor& region_embeds, const Tensor& word_embeds);

double image_caption_similarity(const ImageRecord& image, const CaptionRecord& caption,
                                const AlignParams& params, bool normalize = true);

// S[k][l] = similarity of image k against caption l, for aligned lists where
// caption l is the chosen caption of image l.
Tensor batch_similarity(const std::vector<ImageRecord>& images,
                        const std::vector<CaptionRecord>& captions,
                        const AlignParams& params, bool normalize = true);

// Max-margin ranking cost over a square similarity matrix:
//   C = sum_k sum_{l != k} [max(0, S_kl - S_kk + 1) + max(0, S_lk - S_kk + 1)]
// Diagonal terms are excluded so a fully separated batch reaches C = 0.
double margin_cost(const Tensor& similarity);

struct CostGrads {
  double cost = 0.0;
  std::map<std::string, Tensor> grads;  // W_m, b_m, W_d, b_d
};

// Analytic subgradients of the margin cost through the similarity, the
// threshold, the region max (flowing only to the argmax region, lowest index
// on ties), and the word ReLU.
CostGrads cost_gradients(const std::vector<ImageRecord>& images,
                         const std::vector<CaptionRecord>& captions,
                         const AlignParams& params, bool normalize = true);

struct FitConfig {
  std::size_t h = 512;
  double learning_rate = 1e-6;
  double momentum = 0.9;
  std::size_t batch_images = 40;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
};

struct FitResult {
  AlignParams params;
  std::vector<double> epoch_costs;  // mean batch cost per epoch
};

// SGD over shuffled batches of images, sampling one caption per image
// uniformly per batch. Word vectors are unit-normalized at model input.
// Deterministic given cfg.seed. Every image must have at least one caption.
FitResult fit(const std::vector<ImageRecord>& images,
              const std::vector<CaptionRecord>& captions, const FitConfig& cfg);

struct WordAlignment {
  std::size_t word_index = 0;
  std::size_t region_index = 0;
  double score = 0.0;  // max inner product, before thresholding
};

// For each caption word, the region with the highest embedded inner product
// (lowest index on ties). Consumers display a link only when score > 0.
std::vector<WordAlignment> infer_alignment(const ImageRecord& image,
                                           const CaptionRecord& caption,
                                           const AlignParams& params, bool normalize = true);

}  // namespace specembed
