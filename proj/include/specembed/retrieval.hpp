#pragma once

#include <string>
#include <vector>

#include "specembed/align.hpp"
#include "specembed/tensor.hpp"

namespace specembed {

// One query's ranked candidate pool. Candidates sort by descending score,
// ties by ascending id; true_ranks holds the 1-based positions of every
// correct candidate, ascending.
struct RankingResult {
  std::string query_id;
  std::vector<std::pair<std::string, double>> ranked;
  std::vector<std::size_t> true_ranks;

  std::size_t best_rank() const { return true_ranks.front(); }
};

// Shared ranking core: deterministic sort of (id, score) with the correct
// set marked. Exposed so callers with precomputed scores rank identically.
RankingResult rank_candidates(const std::string& query_id,
                              const std::vector<std::string>& candidate_ids,
                              const std::vector<double>& scores,
                              const std::vector<std::string>& true_ids);

// Rank the image pool against a caption query by the fragment similarity.
// The caption's own image must be present in the pool.
RankingResult image_search(const CaptionRecord& query, const std::vector<ImageRecord>& pool,
                           const AlignParams& params);

// Rank the caption pool against an image query; any of the image's captions
// counts as correct and at least one must be present.
RankingResult image_annotation(const ImageRecord& query,
                               const std::vector<CaptionRecord>& pool,
                               const AlignParams& params);

// Fraction of queries whose best correct candidate ranks within the top k.
double recall_at_k(const std::vector<RankingResult>& results, std::size_t k);

// Precomputed-embedding pools so evaluation over many queries embeds each
// record once. Scores match the record-level functions bitwise.
struct EmbeddedImagePool {
  std::vector<std::string> ids;
  std::vector<Tensor> region_embeds;

  static EmbeddedImagePool build(const std::vector<ImageRecord>& images,
                                 const AlignParams& params);
};

struct EmbeddedCaptionPool {
  std::vector<std::string> ids;
  std::vector<std::string> image_ids;
  std::vector<Tensor> word_embeds;

  static EmbeddedCaptionPool build(const std::vector<CaptionRecord>& captions,
                                   const AlignParams& params, bool normalize = true);
};

RankingResult image_search(const std::string& caption_id, const Tensor& word_embeds,
                           const std::string& true_image_id, const EmbeddedImagePool& pool);

RankingResult image_annotation(const std::string& image_id, const Tensor& region_embeds,
                               const EmbeddedCaptionPool& pool);

}  // namespace specembed
