#include "specembed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "specembed/errors.hpp"
#include "specembed/frontend.hpp"

namespace specembed {

namespace {

// Unit-norm prototypes with pairwise cosine < 0.5, rejection sampled.
std::vector<Tensor> make_prototypes(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<Tensor> protos;
  protos.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    bool accepted = false;
    for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
      Tensor cand({dim});
      double norm = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        cand[i] = rng.gaussian();
        norm += cand[i] * cand[i];
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (std::size_t i = 0; i < dim; ++i) cand[i] /= norm;
      accepted = true;
      for (const Tensor& p : protos) {
        double cosine = 0.0;
        for (std::size_t i = 0; i < dim; ++i) cosine += cand[i] * p[i];
        if (cosine >= 0.5) {
          accepted = false;
          break;
        }
      }
      if (accepted) protos.push_back(std::move(cand));
    }
    if (!accepted) {
      throw ParamError("prototype rejection failed: " + std::to_string(count) +
                       " concepts do not fit in dimension " + std::to_string(dim) +
                       " with pairwise cosine < 0.5");
    }
  }
  return protos;
}

std::string format_id(const char* fmt, std::size_t a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, a);
  return buf;
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
  if (cfg.n_concepts < 2) throw ParamError("synth: n_concepts must be >= 2");
  if (cfg.words_per_caption > cfg.regions_per_image) {
    throw ParamError("synth: words_per_caption must be <= regions_per_image");
  }
  if (cfg.words_per_caption > cfg.n_concepts) {
    throw ParamError("synth: words_per_caption must be <= n_concepts");
  }
  if (cfg.n_images < 1 || cfg.captions_per_image < 1 || cfg.words_per_caption < 1) {
    throw ParamError("synth: counts must be >= 1");
  }

  Rng rng(cfg.seed);
  const auto image_protos = make_prototypes(cfg.n_concepts, cfg.d_image, rng);
  const auto word_protos = make_prototypes(cfg.n_concepts, cfg.d_word, rng);

  SynthDataset out;
  out.images.reserve(cfg.n_images);
  out.captions.reserve(cfg.n_images * cfg.captions_per_image);

  for (std::size_t i = 0; i < cfg.n_images; ++i) {
    const std::string image_id = format_id("img_%05zu", i);
    const std::vector<std::size_t> salient =
        rng.sample_without_replacement(cfg.n_concepts, cfg.words_per_caption);

    std::vector<int> region_concepts;
    region_concepts.reserve(cfg.regions_per_image);
    for (std::size_t s : salient) region_concepts.push_back(static_cast<int>(s));
    // Remaining regions repeat the image's own salient concepts, the way
    // overlapping detector proposals cover the same few objects repeatedly.
    for (std::size_t r = cfg.words_per_caption; r < cfg.regions_per_image; ++r) {
      region_concepts.push_back(
          static_cast<int>(salient[rng.uniform_index(salient.size())]));
    }
    rng.shuffle(region_concepts);

    ImageRecord image;
    image.image_id = image_id;
    image.regions = Tensor({cfg.regions_per_image, cfg.d_image});
    for (std::size_t r = 0; r < cfg.regions_per_image; ++r) {
      const Tensor& proto = image_protos[static_cast<std::size_t>(region_concepts[r])];
      double* row = image.regions.data() + r * cfg.d_image;
      for (std::size_t j = 0; j < cfg.d_image; ++j) {
        row[j] = proto[j] + cfg.noise_sigma * rng.gaussian();
      }
    }
    out.truth.image_region_concepts[image_id] = region_concepts;
    out.images.push_back(std::move(image));

    for (std::size_t c = 0; c < cfg.captions_per_image; ++c) {
      CaptionRecord caption;
      caption.caption_id = image_id + format_id("_cap_%zu", c);
      caption.image_id = image_id;
      std::vector<std::size_t> word_concepts = salient;
      rng.shuffle(word_concepts);
      caption.words = Tensor({cfg.words_per_caption, cfg.d_word});
      std::vector<int> concept_trace;
      concept_trace.reserve(cfg.words_per_caption);
      for (std::size_t t = 0; t < cfg.words_per_caption; ++t) {
        const Tensor& proto = word_protos[word_concepts[t]];
        double* row = caption.words.data() + t * cfg.d_word;
        for (std::size_t j = 0; j < cfg.d_word; ++j) {
          row[j] = proto[j] + cfg.noise_sigma * rng.gaussian();
        }
        concept_trace.push_back(static_cast<int>(word_concepts[t]));
      }
      out.truth.caption_word_concepts[caption.caption_id] = concept_trace;
      out.captions.push_back(std::move(caption));
    }
  }
  return out;
}

OracleSets oracle_alignment(const SynthDataset& dataset) {
  OracleSets oracle;
  oracle.reserve(dataset.captions.size());
  for (const auto& caption : dataset.captions) {
    const auto& word_concepts = dataset.truth.caption_word_concepts.at(caption.caption_id);
    const auto& region_concepts = dataset.truth.image_region_concepts.at(caption.image_id);
    std::vector<std::vector<std::size_t>> per_word;
    per_word.reserve(word_concepts.size());
    for (int concept_id : word_concepts) {
      std::vector<std::size_t> regions;
      for (std::size_t r = 0; r < region_concepts.size(); ++r) {
        if (region_concepts[r] == concept_id) regions.push_back(r);
      }
      per_word.push_back(std::move(regions));
    }
    oracle.push_back(std::move(per_word));
  }
  return oracle;
}

std::vector<LabeledSpectrogram> generate_tone_spectrograms(const ToneGridConfig& cfg) {
  if (cfg.n_classes < 1 || cfg.per_class < 1) throw ParamError("tone grids: counts must be >= 1");
  if (cfg.bands < 2 || cfg.frames < 1) throw ParamError("tone grids: grid too small");

  Rng rng(cfg.seed);

  // Per class: a few tones, each a Gaussian bump across mel rows held for a
  // random span of frames.
  struct Tone {
    double row_center, row_width, amplitude;
    std::size_t frame_start, frame_end;
  };
  std::vector<std::vector<Tone>> templates(cfg.n_classes);
  for (auto& tones : templates) {
    tones.resize(cfg.tones_per_class);
    for (auto& tone : tones) {
      tone.row_center = rng.uniform() * static_cast<double>(cfg.bands - 1);
      tone.row_width = 0.8 + 1.7 * rng.uniform();
      tone.amplitude = 0.5 + rng.uniform();
      const std::size_t a = rng.uniform_index(cfg.frames);
      const std::size_t b = rng.uniform_index(cfg.frames);
      tone.frame_start = std::min(a, b);
      tone.frame_end = std::max(a, b) + 1;
    }
  }

  std::vector<LabeledSpectrogram> out;
  out.reserve(cfg.n_classes * cfg.per_class);
  for (std::size_t cls = 0; cls < cfg.n_classes; ++cls) {
    for (std::size_t e = 0; e < cfg.per_class; ++e) {
      Tensor grid({cfg.bands, cfg.frames});
      for (const Tone& tone : templates[cls]) {
        for (std::size_t r = 0; r < cfg.bands; ++r) {
          const double d = (static_cast<double>(r) - tone.row_center) / tone.row_width;
          const double level = tone.amplitude * std::exp(-0.5 * d * d);
          if (level < 1e-6) continue;
          for (std::size_t t = tone.frame_start; t < tone.frame_end; ++t) {
            grid(r, t) += level;
          }
        }
      }
      for (std::size_t i = 0; i < grid.size(); ++i) grid[i] += cfg.noise_sigma * rng.gaussian();
      LabeledSpectrogram ex;
      ex.spec = normalize_spectrogram(grid);
      ex.label = cls;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace specembed
