#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "specembed/align.hpp"
#include "specembed/retrieval.hpp"

namespace specembed {

// {"caption_id", "image_id", "alignments": [{word_index, region_index, score}]}
nlohmann::json alignment_to_json(const CaptionRecord& caption,
                                 const std::vector<WordAlignment>& alignments);

// Schematic rendering: caption words on the left, region slots on the right,
// a link drawn only where the alignment score is positive.
std::string alignment_to_svg(const CaptionRecord& caption,
                             const std::vector<WordAlignment>& alignments,
                             std::size_t n_regions = kRegionsPerImage);

// {"task", "pool_size", "k", "recall", "per_query": [{query_id, rank}]}
nlohmann::json evaluation_report(const std::string& task, std::size_t pool_size,
                                 std::size_t k, double recall,
                                 const std::vector<RankingResult>& results);

// query_id,rank rows with a header line.
std::string evaluation_csv(const std::vector<RankingResult>& results);

}  // namespace specembed
