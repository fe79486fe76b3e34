#pragma once

#include <filesystem>
#include <vector>

#include "specembed/align.hpp"
#include "specembed/synth.hpp"

namespace specembed {

struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<CaptionRecord> captions;
};

// Manifest: JSON lines. First line {"schema": 1}; each following line one
// image record:
//   {"image_id": ..., "region_tensor_path": ...,          // 20 x d_I tensor
//    "captions": [{"caption_id": ...,
//                  "word_tensor_path": ...                // N_w x d_W tensor
//                  | "spectrogram_paths": [...],          // each 40 x 100
//                  "word_texts": [...]  (optional)}]}
// Paths resolve relative to the manifest's directory. A zero-line file is an
// empty dataset. Validation failures raise DataError naming the line.
// Referenced tensors are loaded and dimension-checked; caption spectrograms
// stay on disk with their resolved paths recorded.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes tensors under dir (regions/, words/, spectrograms/) and a manifest
// with relative paths. Captions lacking word tensors must carry spectrogram
// paths, which are copied into the dataset.
void write_dataset(const std::filesystem::path& dir, const std::string& manifest_name,
                   const std::vector<ImageRecord>& images,
                   const std::vector<CaptionRecord>& captions);

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace specembed
