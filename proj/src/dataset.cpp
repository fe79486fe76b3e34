#include "specembed/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "specembed/errors.hpp"
#include "specembed/frontend.hpp"
#include "specembed/tensor_io.hpp"

namespace specembed {

using nlohmann::json;

namespace {

[[noreturn]] void line_error(const std::filesystem::path& manifest, std::size_t line,
                             const std::string& msg) {
  throw DataError(manifest.string() + " line " + std::to_string(line) + ": " + msg);
}

Tensor load_checked_tensor(const std::filesystem::path& manifest, std::size_t line,
                           const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    line_error(manifest, line, "missing tensor file '" + path.string() + "'");
  }
  try {
    return read_tensor(path);
  } catch (const FormatError& e) {
    line_error(manifest, line, e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
  const std::filesystem::path base = manifest_path.parent_path();

  Dataset out;
  std::set<std::string> seen_images;
  std::string line;
  std::size_t line_no = 0;
  bool saw_schema = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(manifest_path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!saw_schema) {
      if (!rec.is_object() || !rec.contains("schema")) {
        line_error(manifest_path, line_no, "first line must be the schema header");
      }
      if (rec["schema"] != 1) {
        line_error(manifest_path, line_no, "unsupported schema version");
      }
      saw_schema = true;
      continue;
    }

    if (!rec.contains("image_id") || !rec.contains("region_tensor_path")) {
      line_error(manifest_path, line_no, "image record needs image_id and region_tensor_path");
    }
    ImageRecord image;
    image.image_id = rec["image_id"].get<std::string>();
    if (!seen_images.insert(image.image_id).second) {
      line_error(manifest_path, line_no, "duplicate image id '" + image.image_id + "'");
    }
    image.regions = load_checked_tensor(manifest_path, line_no,
                                        base / rec["region_tensor_path"].get<std::string>());
    if (image.regions.rank() != 2 || image.regions.dim(0) != kRegionsPerImage) {
      line_error(manifest_path, line_no,
                 "region tensor " + dims_to_string(image.regions.dims()) +
                     ": expected first dim " + std::to_string(kRegionsPerImage));
    }

    for (const json& cap : rec.value("captions", json::array())) {
      CaptionRecord caption;
      caption.image_id = image.image_id;
      if (!cap.contains("caption_id")) {
        line_error(manifest_path, line_no, "caption record needs caption_id");
      }
      caption.caption_id = cap["caption_id"].get<std::string>();
      if (cap.contains("word_texts")) {
        caption.word_texts = cap["word_texts"].get<std::vector<std::string>>();
      }
      if (cap.contains("word_tensor_path")) {
        caption.words = load_checked_tensor(manifest_path, line_no,
                                            base / cap["word_tensor_path"].get<std::string>());
        if (caption.words.rank() != 2) {
          line_error(manifest_path, line_no,
                     "word tensor for '" + caption.caption_id + "' must be rank 2, got " +
                         dims_to_string(caption.words.dims()));
        }
      } else if (cap.contains("spectrogram_paths")) {
        for (const json& p : cap["spectrogram_paths"]) {
          const std::filesystem::path sp = base / p.get<std::string>();
          caption.spectrogram_paths.push_back(sp.string());
          Tensor spec = load_checked_tensor(manifest_path, line_no, sp);
          if (spec.rank() != 2 || spec.dim(0) != kMelBands) {
            line_error(manifest_path, line_no,
                       "spectrogram " + sp.string() + " has dims " +
                           dims_to_string(spec.dims()) + ", expected " +
                           std::to_string(kMelBands) + " rows");
          }
        }
        if (caption.spectrogram_paths.empty()) {
          line_error(manifest_path, line_no,
                     "caption '" + caption.caption_id + "' has empty spectrogram_paths");
        }
      } else {
        line_error(manifest_path, line_no,
                   "caption '" + caption.caption_id +
                       "' needs word_tensor_path or spectrogram_paths");
      }
      out.captions.push_back(std::move(caption));
    }
    out.images.push_back(std::move(image));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::string& manifest_name,
                   const std::vector<ImageRecord>& images,
                   const std::vector<CaptionRecord>& captions) {
  std::filesystem::create_directories(dir / "regions");

  std::map<std::string, std::vector<const CaptionRecord*>> captions_of;
  for (const auto& cap : captions) captions_of[cap.image_id].push_back(&cap);
  {
    std::set<std::string> known;
    for (const auto& image : images) {
      if (!known.insert(image.image_id).second) {
        throw DataError("write_dataset: duplicate image id '" + image.image_id + "'");
      }
    }
    for (const auto& cap : captions) {
      if (!known.count(cap.image_id)) {
        throw DataError("write_dataset: caption '" + cap.caption_id +
                        "' references unknown image '" + cap.image_id + "'");
      }
    }
  }

  std::ostringstream manifest;
  manifest << json{{"schema", 1}}.dump() << "\n";
  for (const auto& image : images) {
    const std::string region_rel = "regions/" + image.image_id + ".mmtf";
    write_tensor(dir / region_rel, image.regions);
    json caps = json::array();
    for (const CaptionRecord* cap : captions_of[image.image_id]) {
      json c{{"caption_id", cap->caption_id}};
      if (!cap->word_texts.empty()) c["word_texts"] = cap->word_texts;
      if (!cap->words.empty()) {
        std::filesystem::create_directories(dir / "words");
        const std::string word_rel = "words/" + cap->caption_id + ".mmtf";
        write_tensor(dir / word_rel, cap->words);
        c["word_tensor_path"] = word_rel;
      } else if (!cap->spectrogram_paths.empty()) {
        std::filesystem::create_directories(dir / "spectrograms");
        json paths = json::array();
        std::size_t idx = 0;
        for (const std::string& src : cap->spectrogram_paths) {
          const std::string rel =
              "spectrograms/" + cap->caption_id + "_" + std::to_string(idx++) + ".mmtf";
          std::filesystem::copy_file(src, dir / rel,
                                     std::filesystem::copy_options::overwrite_existing);
          paths.push_back(rel);
        }
        c["spectrogram_paths"] = paths;
      } else {
        throw DataError("write_dataset: caption '" + cap->caption_id +
                        "' has neither word vectors nor spectrograms");
      }
      caps.push_back(std::move(c));
    }
    manifest << json{{"image_id", image.image_id},
                     {"region_tensor_path", region_rel},
                     {"captions", caps}}
                    .dump()
             << "\n";
  }
  std::ofstream out(dir / manifest_name, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + (dir / manifest_name).string());
  out << manifest.str();
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  json j{{"image_region_concepts", truth.image_region_concepts},
         {"caption_word_concepts", truth.caption_word_concepts}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write ground truth: " + path.string());
  out << j.dump(2) << "\n";
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  GroundTruth truth;
  truth.image_region_concepts =
      j.at("image_region_concepts").get<std::map<std::string, std::vector<int>>>();
  truth.caption_word_concepts =
      j.at("caption_word_concepts").get<std::map<std::string, std::vector<int>>>();
  return truth;
}

}  // namespace specembed
