#include "specembed/model_io.hpp"

#include <fstream>

#include "specembed/errors.hpp"
#include "specembed/tensor_io.hpp"

namespace specembed {

using nlohmann::json;

void save_model(const std::filesystem::path& dir, const json& header,
                const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::filesystem::create_directories(dir);
  json meta = header;
  json files = json::object();
  for (const auto& [name, tensor] : tensors) {
    const std::string file = name + ".mmtf";
    write_tensor(dir / file, *tensor);
    files[name] = file;
  }
  meta["tensors"] = files;
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) throw DataError("cannot write model header: " + (dir / "model.json").string());
  out << meta.dump(2) << "\n";
}

std::pair<json, std::map<std::string, Tensor>> load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw DataError("cannot open model header: " + (dir / "model.json").string());
  json meta;
  try {
    in >> meta;
  } catch (const json::parse_error& e) {
    throw DataError((dir / "model.json").string() + ": invalid JSON: " + e.what());
  }
  std::map<std::string, Tensor> tensors;
  for (const auto& [name, file] : meta.at("tensors").items()) {
    tensors.emplace(name, read_tensor(dir / file.get<std::string>()));
  }
  return {meta, tensors};
}

namespace {

void to_json_lrn(json& j, const LrnSpec& lrn) {
  j = json{{"width", lrn.width}, {"alpha", lrn.alpha}, {"beta", lrn.beta}, {"k", lrn.k}};
}

LrnSpec lrn_from_json(const json& j) {
  LrnSpec lrn;
  lrn.width = j.at("width").get<std::size_t>();
  lrn.alpha = j.at("alpha").get<double>();
  lrn.beta = j.at("beta").get<double>();
  lrn.k = j.at("k").get<double>();
  return lrn;
}

}  // namespace

void save_word_cnn(const std::filesystem::path& dir, const WordCnnParams& params,
                   const json& extra) {
  const WordCnnConfig& cfg = params.cfg;
  json lrn;
  to_json_lrn(lrn, cfg.lrn);
  json header{{"kind", "word_cnn"},
              {"config",
               {{"bands", cfg.bands},
                {"frames", cfg.frames},
                {"conv_channels", cfg.conv_channels},
                {"filter_time", cfg.filter_time},
                {"freq_pad", cfg.freq_pad},
                {"lrn", lrn},
                {"pool",
                 {{"pool_h", cfg.pool.pool_h},
                  {"pool_w", cfg.pool.pool_w},
                  {"stride_h", cfg.pool.stride_h},
                  {"stride_w", cfg.pool.stride_w}}},
                {"fc_dim", cfg.fc_dim},
                {"dropout_rate", cfg.dropout_rate},
                {"vocab_size", cfg.vocab_size}}}};
  header.update(extra);
  save_model(dir, header,
             {{"mean_spectrogram", &params.mean_spectrogram},
              {"conv_w", &params.conv_w},
              {"conv_b", &params.conv_b},
              {"fc1_w", &params.fc1_w},
              {"fc1_b", &params.fc1_b},
              {"fc2_w", &params.fc2_w},
              {"fc2_b", &params.fc2_b},
              {"out_w", &params.out_w},
              {"out_b", &params.out_b}});
}

WordCnnParams load_word_cnn(const std::filesystem::path& dir, json* header_out) {
  auto [meta, tensors] = load_model(dir);
  if (meta.value("kind", "") != "word_cnn") {
    throw DataError(dir.string() + ": not a word_cnn model");
  }
  const json& c = meta.at("config");
  WordCnnConfig cfg;
  cfg.bands = c.at("bands").get<std::size_t>();
  cfg.frames = c.at("frames").get<std::size_t>();
  cfg.conv_channels = c.at("conv_channels").get<std::size_t>();
  cfg.filter_time = c.at("filter_time").get<std::size_t>();
  cfg.freq_pad = c.at("freq_pad").get<std::size_t>();
  cfg.lrn = lrn_from_json(c.at("lrn"));
  cfg.pool.pool_h = c.at("pool").at("pool_h").get<std::size_t>();
  cfg.pool.pool_w = c.at("pool").at("pool_w").get<std::size_t>();
  cfg.pool.stride_h = c.at("pool").at("stride_h").get<std::size_t>();
  cfg.pool.stride_w = c.at("pool").at("stride_w").get<std::size_t>();
  cfg.fc_dim = c.at("fc_dim").get<std::size_t>();
  cfg.dropout_rate = c.at("dropout_rate").get<double>();
  cfg.vocab_size = c.at("vocab_size").get<std::size_t>();
  cfg.validate();

  WordCnnParams params;
  params.cfg = cfg;
  params.mean_spectrogram = std::move(tensors.at("mean_spectrogram"));
  params.conv_w = std::move(tensors.at("conv_w"));
  params.conv_b = std::move(tensors.at("conv_b"));
  params.fc1_w = std::move(tensors.at("fc1_w"));
  params.fc1_b = std::move(tensors.at("fc1_b"));
  params.fc2_w = std::move(tensors.at("fc2_w"));
  params.fc2_b = std::move(tensors.at("fc2_b"));
  params.out_w = std::move(tensors.at("out_w"));
  params.out_b = std::move(tensors.at("out_b"));

  require_dims(params.mean_spectrogram, {cfg.bands, cfg.frames}, "mean_spectrogram");
  require_dims(params.conv_w, {cfg.conv_channels, 1, cfg.bands, cfg.filter_time}, "conv_w");
  require_dims(params.fc1_w, {cfg.fc_dim, cfg.flat_dim()}, "fc1_w");
  require_dims(params.fc2_w, {cfg.fc_dim, cfg.fc_dim}, "fc2_w");
  require_dims(params.out_w, {cfg.vocab_size, cfg.fc_dim}, "out_w");
  if (header_out) *header_out = meta;
  return params;
}

void save_align(const std::filesystem::path& dir, const AlignParams& params,
                const json& extra) {
  json header{{"kind", "align"},
              {"h", params.h},
              {"d_image", params.d_image},
              {"d_word", params.d_word}};
  header.update(extra);
  save_model(dir, header,
             {{"W_m", &params.region_weight},
              {"b_m", &params.region_bias},
              {"W_d", &params.word_weight},
              {"b_d", &params.word_bias}});
}

AlignParams load_align(const std::filesystem::path& dir, json* header_out) {
  auto [meta, tensors] = load_model(dir);
  if (meta.value("kind", "") != "align") {
    throw DataError(dir.string() + ": not an align model");
  }
  AlignParams params;
  params.h = meta.at("h").get<std::size_t>();
  params.d_image = meta.at("d_image").get<std::size_t>();
  params.d_word = meta.at("d_word").get<std::size_t>();
  params.region_weight = std::move(tensors.at("W_m"));
  params.region_bias = std::move(tensors.at("b_m"));
  params.word_weight = std::move(tensors.at("W_d"));
  params.word_bias = std::move(tensors.at("b_d"));
  require_dims(params.region_weight, {params.h, params.d_image}, "W_m");
  require_dims(params.region_bias, {params.h}, "b_m");
  require_dims(params.word_weight, {params.h, params.d_word}, "W_d");
  require_dims(params.word_bias, {params.h}, "b_d");
  if (header_out) *header_out = meta;
  return params;
}

}  // namespace specembed
