#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specembed/align.hpp"
#include "specembed/word_cnn.hpp"

namespace specembed {

// Models persist as a directory: model.json (header: kind, dims, config,
// seed, plus a name -> file map) and one tensor file per parameter.
void save_model(const std::filesystem::path& dir, const nlohmann::json& header,
                const std::vector<std::pair<std::string, const Tensor*>>& tensors);

std::pair<nlohmann::json, std::map<std::string, Tensor>> load_model(
    const std::filesystem::path& dir);

void save_word_cnn(const std::filesystem::path& dir, const WordCnnParams& params,
                   const nlohmann::json& extra = nlohmann::json::object());
WordCnnParams load_word_cnn(const std::filesystem::path& dir,
                            nlohmann::json* header_out = nullptr);

void save_align(const std::filesystem::path& dir, const AlignParams& params,
                const nlohmann::json& extra = nlohmann::json::object());
AlignParams load_align(const std::filesystem::path& dir,
                       nlohmann::json* header_out = nullptr);

}  // namespace specembed
