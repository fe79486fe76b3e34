#include "specembed/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "specembed/errors.hpp"

namespace specembed {

AlignParams AlignParams::init(std::size_t h, std::size_t d_image, std::size_t d_word,
                              std::uint64_t seed) {
  if (h < 1 || d_image < 1 || d_word < 1) throw ParamError("align dims must be >= 1");
  Rng rng(seed);
  AlignParams p;
  p.h = h;
  p.d_image = d_image;
  p.d_word = d_word;
  p.region_weight = Tensor({h, d_image});
  p.word_weight = Tensor({h, d_word});
  const double sigma_m = 1.0 / std::sqrt(static_cast<double>(d_image));
  for (std::size_t i = 0; i < p.region_weight.size(); ++i) {
    p.region_weight[i] = sigma_m * rng.gaussian();
  }
  const double sigma_d = 1.0 / std::sqrt(static_cast<double>(d_word));
  for (std::size_t i = 0; i < p.word_weight.size(); ++i) {
    p.word_weight[i] = sigma_d * rng.gaussian();
  }
  p.region_bias = Tensor({h});
  p.word_bias = Tensor({h});
  return p;
}

AlignParams AlignParams::zeros(std::size_t h, std::size_t d_image, std::size_t d_word) {
  if (h < 1 || d_image < 1 || d_word < 1) throw ParamError("align dims must be >= 1");
  AlignParams p;
  p.h = h;
  p.d_image = d_image;
  p.d_word = d_word;
  p.region_weight = Tensor({h, d_image});
  p.region_bias = Tensor({h});
  p.word_weight = Tensor({h, d_word});
  p.word_bias = Tensor({h});
  return p;
}

ParamRefs AlignParams::param_refs() {
  return {{"W_d", &word_weight},
          {"W_m", &region_weight},
          {"b_d", &word_bias},
          {"b_m", &region_bias}};
}

namespace {

void affine_into(const Tensor& weight, const Tensor& bias, const double* x, double* out) {
  const std::size_t h = weight.dim(0), d = weight.dim(1);
  for (std::size_t r = 0; r < h; ++r) {
    const double* w_row = weight.data() + r * d;
    double acc = bias[r];
    for (std::size_t j = 0; j < d; ++j) acc += w_row[j] * x[j];
    out[r] = acc;
  }
}

double l2_norm(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

}  // namespace

Tensor embed_region(const Tensor& v, const AlignParams& params) {
  require_dims(v, {params.d_image}, "embed_region input");
  Tensor y({params.h});
  affine_into(params.region_weight, params.region_bias, v.data(), y.data());
  return y;
}

Tensor embed_word_vec(const Tensor& w, const AlignParams& params, bool normalize) {
  require_dims(w, {params.d_word}, "embed_word_vec input");
  Tensor x({params.h});
  if (normalize) {
    const double norm = l2_norm(w.data(), w.size());
    if (norm > 0.0) {
      std::vector<double> unit(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) unit[i] = w[i] / norm;
      affine_into(params.word_weight, params.word_bias, unit.data(), x.data());
    } else {
      affine_into(params.word_weight, params.word_bias, w.data(), x.data());
    }
  } else {
    affine_into(params.word_weight, params.word_bias, w.data(), x.data());
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::max(0.0, x[i]);
  return x;
}

Tensor embed_regions(const Tensor& regions, const AlignParams& params) {
  require_rank(regions, 2, "embed_regions input");
  if (regions.dim(1) != params.d_image) {
    throw ShapeError("embed_regions: region dim " + std::to_string(regions.dim(1)) +
                     " does not match d_image " + std::to_string(params.d_image));
  }
  Tensor out({regions.dim(0), params.h});
  for (std::size_t i = 0; i < regions.dim(0); ++i) {
    affine_into(params.region_weight, params.region_bias, regions.data() + i * params.d_image,
                out.data() + i * params.h);
  }
  return out;
}

Tensor embed_caption_words(const Tensor& words, const AlignParams& params, bool normalize) {
  require_rank(words, 2, "embed_caption_words input");
  if (words.dim(1) != params.d_word) {
    throw ShapeError("embed_caption_words: word dim " + std::to_string(words.dim(1)) +
                     " does not match d_word " + std::to_string(params.d_word));
  }
  Tensor out({words.dim(0), params.h});
  Tensor row({params.d_word});
  for (std::size_t t = 0; t < words.dim(0); ++t) {
    std::copy(words.data() + t * params.d_word, words.data() + (t + 1) * params.d_word,
              row.data());
    Tensor x = embed_word_vec(row, params, normalize);
    std::copy(x.data(), x.data() + params.h, out.data() + t * params.h);
  }
  return out;
}

double fragment_similarity(const Tensor& region_embeds, const Tensor& word_embeds) {
  require_rank(region_embeds, 2, "fragment_similarity regions");
  require_rank(word_embeds, 2, "fragment_similarity words");
  const std::size_t h = region_embeds.dim(1);
  if (word_embeds.dim(1) != h) {
    throw ShapeError("fragment_similarity: embedding dims disagree");
  }
  const std::size_t n_regions = region_embeds.dim(0), n_words = word_embeds.dim(0);
  double score = 0.0;
  for (std::size_t t = 0; t < n_words; ++t) {
    const double* x = word_embeds.data() + t * h;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_regions; ++i) {
      const double* y = region_embeds.data() + i * h;
      double dot = 0.0;
      for (std::size_t j = 0; j < h; ++j) dot += y[j] * x[j];
      best = std::max(best, dot);
    }
    score += std::max(0.0, best);
  }
  return score;
}

double image_caption_similarity(const ImageRecord& image, const CaptionRecord& caption,
                                const AlignParams& params, bool normalize) {
  return fragment_similarity(embed_regions(image.regions, params),
                             embed_caption_words(caption.words, params, normalize));
}

Tensor batch_similarity(const std::vector<ImageRecord>& images,
                        const std::vector<CaptionRecord>& captions,
                        const AlignParams& params, bool normalize) {
  if (images.size() != captions.size()) {
    throw ParamError("batch_similarity: image and caption lists must have equal length");
  }
  const std::size_t b = images.size();
  std::vector<Tensor> region_embeds, word_embeds;
  region_embeds.reserve(b);
  word_embeds.reserve(b);
  for (const auto& im : images) region_embeds.push_back(embed_regions(im.regions, params));
  for (const auto& cap : captions) {
    word_embeds.push_back(embed_caption_words(cap.words, params, normalize));
  }
  Tensor s({b, b});
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t l = 0; l < b; ++l) {
      s(k, l) = fragment_similarity(region_embeds[k], word_embeds[l]);
    }
  }
  return s;
}

double margin_cost(const Tensor& similarity) {
  require_rank(similarity, 2, "margin_cost input");
  if (similarity.dim(0) != similarity.dim(1)) {
    throw ShapeError("margin_cost: similarity matrix must be square");
  }
  const std::size_t b = similarity.dim(0);
  double cost = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    const double s_kk = similarity(k, k);
    for (std::size_t l = 0; l < b; ++l) {
      if (l == k) continue;
      cost += std::max(0.0, similarity(k, l) - s_kk + 1.0);
      cost += std::max(0.0, similarity(l, k) - s_kk + 1.0);
    }
  }
  return cost;
}

CostGrads cost_gradients(const std::vector<ImageRecord>& images,
                         const std::vector<CaptionRecord>& captions,
                         const AlignParams& params, bool normalize) {
  if (images.empty()) throw ParamError("cost_gradients: empty batch");
  if (images.size() != captions.size()) {
    throw ParamError("cost_gradients: image and caption lists must have equal length");
  }
  const std::size_t b = images.size();
  const std::size_t h = params.h;

  // Embeddings plus what the backward pass needs: the normalized word inputs
  // and the word ReLU masks.
  std::vector<Tensor> region_embeds(b);
  std::vector<Tensor> word_embeds(b);
  std::vector<Tensor> word_inputs(b);  // normalized word vectors, N x d_word
  for (std::size_t k = 0; k < b; ++k) {
    region_embeds[k] = embed_regions(images[k].regions, params);
    const Tensor& words = captions[k].words;
    if (words.empty()) {
      throw DataError("cost_gradients: caption '" + captions[k].caption_id +
                      "' has no word vectors");
    }
    word_embeds[k] = embed_caption_words(words, params, normalize);
    Tensor inputs = words;
    if (normalize) {
      for (std::size_t t = 0; t < words.dim(0); ++t) {
        double* row = inputs.data() + t * params.d_word;
        const double norm = l2_norm(row, params.d_word);
        if (norm > 0.0) {
          for (std::size_t j = 0; j < params.d_word; ++j) row[j] /= norm;
        }
      }
    }
    word_inputs[k] = std::move(inputs);
  }

  Tensor similarity({b, b});
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t l = 0; l < b; ++l) {
      similarity(k, l) = fragment_similarity(region_embeds[k], word_embeds[l]);
    }
  }

  // Hinge coefficients: coeff(k, l) = dC/dS_kl. Subgradient 0 exactly on the
  // margin boundary.
  CostGrads result;
  Tensor coeff({b, b});
  for (std::size_t k = 0; k < b; ++k) {
    const double s_kk = similarity(k, k);
    for (std::size_t l = 0; l < b; ++l) {
      if (l == k) continue;
      const double h1 = similarity(k, l) - s_kk + 1.0;
      if (h1 > 0.0) {
        result.cost += h1;
        coeff(k, l) += 1.0;
        coeff(k, k) -= 1.0;
      }
      const double h2 = similarity(l, k) - s_kk + 1.0;
      if (h2 > 0.0) {
        result.cost += h2;
        coeff(l, k) += 1.0;
        coeff(k, k) -= 1.0;
      }
    }
  }

  // dC/dY and dC/dX via the threshold and the region argmax.
  std::vector<Tensor> d_region_embeds(b), d_word_embeds(b);
  for (std::size_t k = 0; k < b; ++k) {
    d_region_embeds[k] = Tensor(region_embeds[k].dims());
    d_word_embeds[k] = Tensor(word_embeds[k].dims());
  }
  for (std::size_t k = 0; k < b; ++k) {
    const Tensor& regions = region_embeds[k];
    const std::size_t n_regions = regions.dim(0);
    for (std::size_t l = 0; l < b; ++l) {
      const double c = coeff(k, l);
      if (c == 0.0) continue;
      const Tensor& words = word_embeds[l];
      for (std::size_t t = 0; t < words.dim(0); ++t) {
        const double* x = words.data() + t * h;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < n_regions; ++i) {
          const double* y = regions.data() + i * h;
          double dot = 0.0;
          for (std::size_t j = 0; j < h; ++j) dot += y[j] * x[j];
          if (dot > best) {
            best = dot;
            best_i = i;
          }
        }
        if (best <= 0.0) continue;  // thresholded word contributes nothing
        const double* y_best = regions.data() + best_i * h;
        double* dy = d_region_embeds[k].data() + best_i * h;
        double* dx = d_word_embeds[l].data() + t * h;
        for (std::size_t j = 0; j < h; ++j) {
          dy[j] += c * x[j];
          dx[j] += c * y_best[j];
        }
      }
    }
  }

  // Back through the affine maps. Word side also gates on the ReLU mask
  // (x > 0 iff preactivation > 0 once rectified).
  Tensor d_wm({h, params.d_image}), d_bm({h});
  Tensor d_wd({h, params.d_word}), d_bd({h});
  for (std::size_t k = 0; k < b; ++k) {
    const Tensor& regions = images[k].regions;
    const Tensor& dy_all = d_region_embeds[k];
    for (std::size_t i = 0; i < regions.dim(0); ++i) {
      const double* v = regions.data() + i * params.d_image;
      const double* dy = dy_all.data() + i * h;
      for (std::size_t r = 0; r < h; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        d_bm[r] += g;
        double* row = d_wm.data() + r * params.d_image;
        for (std::size_t j = 0; j < params.d_image; ++j) row[j] += g * v[j];
      }
    }
    const Tensor& inputs = word_inputs[k];
    const Tensor& x_all = word_embeds[k];
    const Tensor& dx_all = d_word_embeds[k];
    for (std::size_t t = 0; t < inputs.dim(0); ++t) {
      const double* w_in = inputs.data() + t * params.d_word;
      const double* x = x_all.data() + t * h;
      const double* dx = dx_all.data() + t * h;
      for (std::size_t r = 0; r < h; ++r) {
        if (x[r] <= 0.0) continue;  // ReLU subgradient
        const double g = dx[r];
        if (g == 0.0) continue;
        d_bd[r] += g;
        double* row = d_wd.data() + r * params.d_word;
        for (std::size_t j = 0; j < params.d_word; ++j) row[j] += g * w_in[j];
      }
    }
  }
  result.grads.emplace("W_m", std::move(d_wm));
  result.grads.emplace("b_m", std::move(d_bm));
  result.grads.emplace("W_d", std::move(d_wd));
  result.grads.emplace("b_d", std::move(d_bd));
  return result;
}

FitResult fit(const std::vector<ImageRecord>& images,
              const std::vector<CaptionRecord>& captions, const FitConfig& cfg) {
  if (images.empty()) throw ParamError("fit: no images");
  if (cfg.batch_images < 1) throw ParamError("fit: batch_images must be >= 1");

  std::vector<std::vector<std::size_t>> captions_of(images.size());
  {
    std::map<std::string, std::size_t> image_index;
    for (std::size_t i = 0; i < images.size(); ++i) image_index[images[i].image_id] = i;
    for (std::size_t c = 0; c < captions.size(); ++c) {
      auto it = image_index.find(captions[c].image_id);
      if (it == image_index.end()) {
        throw DataError("fit: caption '" + captions[c].caption_id +
                        "' references unknown image '" + captions[c].image_id + "'");
      }
      captions_of[it->second].push_back(c);
    }
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (captions_of[i].empty()) {
      throw DataError("fit: image '" + images[i].image_id + "' has no captions");
    }
  }

  const std::size_t d_image = images.front().regions.dim(1);
  const std::size_t d_word = captions.front().words.dim(1);

  FitResult result;
  result.params = AlignParams::init(cfg.h, d_image, d_word, cfg.seed);
  Rng rng(cfg.seed + 1);
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  const ParamRefs refs = result.params.param_refs();

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_cost = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_images) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_images);
      std::vector<ImageRecord> batch_images;
      std::vector<CaptionRecord> batch_captions;
      batch_images.reserve(end - start);
      batch_captions.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t img = order[i];
        const auto& pool = captions_of[img];
        const std::size_t pick = pool[rng.uniform_index(pool.size())];
        batch_images.push_back(images[img]);
        batch_captions.push_back(captions[pick]);
      }
      CostGrads cg = cost_gradients(batch_images, batch_captions, result.params, true);
      opt.step(refs, cg.grads);
      epoch_cost += cg.cost;
      ++n_batches;
    }
    result.epoch_costs.push_back(epoch_cost / static_cast<double>(n_batches));
  }
  return result;
}

std::vector<WordAlignment> infer_alignment(const ImageRecord& image,
                                           const CaptionRecord& caption,
                                           const AlignParams& params, bool normalize) {
  const Tensor regions = embed_regions(image.regions, params);
  const Tensor words = embed_caption_words(caption.words, params, normalize);
  const std::size_t h = params.h;
  std::vector<WordAlignment> result;
  result.reserve(words.dim(0));
  for (std::size_t t = 0; t < words.dim(0); ++t) {
    const double* x = words.data() + t * h;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < regions.dim(0); ++i) {
      const double* y = regions.data() + i * h;
      double dot = 0.0;
      for (std::size_t j = 0; j < h; ++j) dot += y[j] * x[j];
      if (dot > best) {
        best = dot;
        best_i = i;
      }
    }
    result.push_back({t, best_i, best});
  }
  return result;
}

}  // namespace specembed
