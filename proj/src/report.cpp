#include "specembed/report.hpp"

#include <sstream>

namespace specembed {

using nlohmann::json;

json alignment_to_json(const CaptionRecord& caption,
                       const std::vector<WordAlignment>& alignments) {
  json items = json::array();
  for (const auto& a : alignments) {
    items.push_back(
        {{"word_index", a.word_index}, {"region_index", a.region_index}, {"score", a.score}});
  }
  return json{{"caption_id", caption.caption_id},
              {"image_id", caption.image_id},
              {"alignments", items}};
}

std::string alignment_to_svg(const CaptionRecord& caption,
                             const std::vector<WordAlignment>& alignments,
                             std::size_t n_regions) {
  constexpr int row_h = 24, word_x = 10, box_x = 260, box_w = 90, pad = 16;
  const std::size_t rows = std::max(alignments.size(), n_regions);
  const int height = static_cast<int>(rows) * row_h + 2 * pad;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"380\" height=\"" << height
      << "\">\n";
  svg << "  <style>text{font:12px monospace;}</style>\n";
  for (std::size_t t = 0; t < alignments.size(); ++t) {
    const int y = pad + static_cast<int>(t) * row_h + row_h / 2;
    std::string label = t < caption.word_texts.size() ? caption.word_texts[t]
                                                      : "word_" + std::to_string(t);
    svg << "  <text x=\"" << word_x << "\" y=\"" << y + 4 << "\">" << label << "</text>\n";
  }
  for (std::size_t r = 0; r < n_regions; ++r) {
    const int y = pad + static_cast<int>(r) * row_h;
    svg << "  <rect x=\"" << box_x << "\" y=\"" << y << "\" width=\"" << box_w
        << "\" height=\"" << row_h - 6 << "\" fill=\"none\" stroke=\"#888\"/>\n";
    svg << "  <text x=\"" << box_x + 6 << "\" y=\"" << y + row_h / 2 + 2 << "\">region "
        << r << "</text>\n";
  }
  for (const auto& a : alignments) {
    if (a.score <= 0.0) continue;  // only positive-score links are displayed
    const int y1 = pad + static_cast<int>(a.word_index) * row_h + row_h / 2;
    const int y2 = pad + static_cast<int>(a.region_index) * row_h + row_h / 2 - 3;
    svg << "  <line x1=\"" << word_x + 80 << "\" y1=\"" << y1 << "\" x2=\"" << box_x
        << "\" y2=\"" << y2 << "\" stroke=\"#c33\" stroke-width=\"1.5\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

json evaluation_report(const std::string& task, std::size_t pool_size, std::size_t k,
                       double recall, const std::vector<RankingResult>& results) {
  json per_query = json::array();
  for (const auto& r : results) {
    per_query.push_back({{"query_id", r.query_id}, {"rank", r.best_rank()}});
  }
  return json{{"task", task},
              {"pool_size", pool_size},
              {"k", k},
              {"recall", recall},
              {"per_query", per_query}};
}

std::string evaluation_csv(const std::vector<RankingResult>& results) {
  std::ostringstream out;
  out << "query_id,rank\n";
  for (const auto& r : results) out << r.query_id << "," << r.best_rank() << "\n";
  return out.str();
}

}  // namespace specembed
