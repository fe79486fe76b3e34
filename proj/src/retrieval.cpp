#include "specembed/retrieval.hpp"

#include <algorithm>
#include <set>

#include "specembed/errors.hpp"

namespace specembed {

RankingResult rank_candidates(const std::string& query_id,
                              const std::vector<std::string>& candidate_ids,
                              const std::vector<double>& scores,
                              const std::vector<std::string>& true_ids) {
  if (candidate_ids.empty()) throw ParamError("rank_candidates: empty candidate pool");
  if (candidate_ids.size() != scores.size()) {
    throw ParamError("rank_candidates: ids and scores length mismatch");
  }
  std::vector<std::size_t> order(candidate_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidate_ids[a] < candidate_ids[b];
  });

  const std::set<std::string> truth(true_ids.begin(), true_ids.end());
  RankingResult result;
  result.query_id = query_id;
  result.ranked.reserve(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t i = order[pos];
    result.ranked.emplace_back(candidate_ids[i], scores[i]);
    if (truth.count(candidate_ids[i])) result.true_ranks.push_back(pos + 1);
  }
  if (result.true_ranks.empty()) {
    throw DataError("rank_candidates: no correct candidate in the pool for query '" +
                    query_id + "'");
  }
  return result;
}

EmbeddedImagePool EmbeddedImagePool::build(const std::vector<ImageRecord>& images,
                                           const AlignParams& params) {
  EmbeddedImagePool pool;
  pool.ids.reserve(images.size());
  pool.region_embeds.reserve(images.size());
  for (const auto& im : images) {
    pool.ids.push_back(im.image_id);
    pool.region_embeds.push_back(embed_regions(im.regions, params));
  }
  return pool;
}

EmbeddedCaptionPool EmbeddedCaptionPool::build(const std::vector<CaptionRecord>& captions,
                                               const AlignParams& params, bool normalize) {
  EmbeddedCaptionPool pool;
  for (const auto& cap : captions) {
    pool.ids.push_back(cap.caption_id);
    pool.image_ids.push_back(cap.image_id);
    pool.word_embeds.push_back(embed_caption_words(cap.words, params, normalize));
  }
  return pool;
}

RankingResult image_search(const std::string& caption_id, const Tensor& word_embeds,
                           const std::string& true_image_id, const EmbeddedImagePool& pool) {
  std::vector<double> scores(pool.ids.size());
  for (std::size_t i = 0; i < pool.ids.size(); ++i) {
    scores[i] = fragment_similarity(pool.region_embeds[i], word_embeds);
  }
  return rank_candidates(caption_id, pool.ids, scores, {true_image_id});
}

RankingResult image_search(const CaptionRecord& query, const std::vector<ImageRecord>& pool,
                           const AlignParams& params) {
  return image_search(query.caption_id, embed_caption_words(query.words, params, true),
                      query.image_id, EmbeddedImagePool::build(pool, params));
}

RankingResult image_annotation(const std::string& image_id, const Tensor& region_embeds,
                               const EmbeddedCaptionPool& pool) {
  std::vector<double> scores(pool.ids.size());
  std::vector<std::string> true_ids;
  for (std::size_t i = 0; i < pool.ids.size(); ++i) {
    scores[i] = fragment_similarity(region_embeds, pool.word_embeds[i]);
    if (pool.image_ids[i] == image_id) true_ids.push_back(pool.ids[i]);
  }
  return rank_candidates(image_id, pool.ids, scores, true_ids);
}

RankingResult image_annotation(const ImageRecord& query,
                               const std::vector<CaptionRecord>& pool,
                               const AlignParams& params) {
  return image_annotation(query.image_id, embed_regions(query.regions, params),
                          EmbeddedCaptionPool::build(pool, params, true));
}

double recall_at_k(const std::vector<RankingResult>& results, std::size_t k) {
  if (k < 1) throw ParamError("recall_at_k: k must be >= 1");
  if (results.empty()) throw ParamError("recall_at_k: no ranking results");
  std::size_t hits = 0;
  for (const auto& r : results) {
    if (r.best_rank() <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

}  // namespace specembed
