// specembed: joint audio-visual embedding toolkit.
//
// Subcommands cover the full pipeline: synth (datasets), featurize (wav ->
// spectrogram tensors), pretrain (word classifier), embed (spectrograms ->
// word vectors), train (alignment model), eval (retrieval recall@k), align
// (word-to-region links). Every run is deterministic given its recorded
// config and seed; the resolved config is written into the output directory.
//
// Exit codes: 0 success, 1 data/config error, 2 internal invariant violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "specembed/dataset.hpp"
#include "specembed/errors.hpp"
#include "specembed/frontend.hpp"
#include "specembed/model_io.hpp"
#include "specembed/report.hpp"
#include "specembed/retrieval.hpp"
#include "specembed/synth.hpp"
#include "specembed/tensor_io.hpp"
#include "specembed/wav.hpp"
#include "specembed/word_cnn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specembed;

namespace {

// Config files mirror the CLI flags as JSON keys (long option name without
// the leading dashes). Explicit CLI flags win over file values.
class ConfigMerge {
 public:
  explicit ConfigMerge(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw ParamError("cannot open config file: " + path);
    try {
      in >> cfg_;
    } catch (const json::parse_error& e) {
      throw ParamError(path + ": invalid JSON: " + std::string(e.what()));
    }
    if (!cfg_.is_object()) throw ParamError(path + ": config must be a JSON object");
  }

  template <typename T>
  void field(const char* key, CLI::Option* opt, T& value) {
    known_.insert(key);
    if (!cfg_.contains(key)) return;
    if (opt->count() > 0) return;
    try {
      value = cfg_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParamError(std::string("config key '") + key + "': " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, unused] : cfg_.items()) {
      if (!known_.count(key)) throw ParamError("config: unknown key '" + key + "'");
    }
  }

 private:
  json cfg_;
  std::set<std::string> known_;
};

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void record_config(const fs::path& out_dir, const std::string& subcommand, json resolved) {
  resolved["subcommand"] = subcommand;
  write_json(out_dir / "resolved_config.json", resolved);
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
  std::string task = "pairs";
  std::string out;
  std::string config;
  // pairs
  std::size_t concepts = 10, d_image = 64, d_word = 32;
  std::size_t words_per_caption = 4, captions_per_image = 5;
  std::size_t images = 300, test_images = 100;
  double noise = 0.05;
  // words
  std::size_t classes = 50, per_class = 5;
  double word_noise = 0.1;
  std::uint64_t seed = 0;
};

int run_synth(const SynthOpts& opt) {
  const fs::path out(opt.out);
  if (opt.task == "pairs") {
    SynthConfig cfg;
    cfg.n_concepts = opt.concepts;
    cfg.d_image = opt.d_image;
    cfg.d_word = opt.d_word;
    cfg.words_per_caption = opt.words_per_caption;
    cfg.captions_per_image = opt.captions_per_image;
    cfg.noise_sigma = opt.noise;
    cfg.n_images = opt.images;
    cfg.seed = opt.seed;
    if (opt.test_images >= opt.images) {
      throw ParamError("synth: test-images must be smaller than images");
    }
    SynthDataset data = generate(cfg);

    const std::size_t n_train = opt.images - opt.test_images;
    auto split = [&](std::size_t begin, std::size_t end, const fs::path& dir) {
      std::vector<ImageRecord> images(data.images.begin() + begin, data.images.begin() + end);
      std::set<std::string> ids;
      for (const auto& im : images) ids.insert(im.image_id);
      std::vector<CaptionRecord> captions;
      GroundTruth truth;
      for (const auto& cap : data.captions) {
        if (ids.count(cap.image_id)) {
          captions.push_back(cap);
          truth.caption_word_concepts[cap.caption_id] =
              data.truth.caption_word_concepts.at(cap.caption_id);
        }
      }
      for (const auto& im : images) {
        truth.image_region_concepts[im.image_id] =
            data.truth.image_region_concepts.at(im.image_id);
      }
      fs::create_directories(dir);
      write_dataset(dir, "manifest.jsonl", images, captions);
      write_ground_truth(dir / "ground_truth.json", truth);
    };
    split(0, n_train, out / "train");
    if (opt.test_images > 0) split(n_train, opt.images, out / "test");
    std::cout << "wrote " << n_train << " train / " << opt.test_images << " test images to "
              << out << "\n";
  } else if (opt.task == "words") {
    ToneGridConfig cfg;
    cfg.n_classes = opt.classes;
    cfg.per_class = opt.per_class;
    cfg.noise_sigma = opt.word_noise;
    cfg.seed = opt.seed;
    auto data = generate_tone_spectrograms(cfg);
    fs::create_directories(out);
    json items = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "class_%03zu_ex_%02zu.mmtf", data[i].label,
                    i % cfg.per_class);
      write_tensor(out / name, data[i].spec);
      char word[32];
      std::snprintf(word, sizeof(word), "class_%03zu", data[i].label);
      items.push_back({{"tensor", name}, {"word", word}});
    }
    write_json(out / "index.json", json{{"items", items}});
    std::cout << "wrote " << data.size() << " labeled spectrograms to " << out << "\n";
  } else {
    throw ParamError("synth: task must be 'pairs' or 'words'");
  }

  record_config(out, "synth",
                json{{"task", opt.task},
                     {"out", opt.out},
                     {"concepts", opt.concepts},
                     {"d-image", opt.d_image},
                     {"d-word", opt.d_word},
                     {"words-per-caption", opt.words_per_caption},
                     {"captions-per-image", opt.captions_per_image},
                     {"images", opt.images},
                     {"test-images", opt.test_images},
                     {"noise", opt.noise},
                     {"classes", opt.classes},
                     {"per-class", opt.per_class},
                     {"word-noise", opt.word_noise},
                     {"seed", opt.seed}});
  return 0;
}

// ------------------------------------------------------------ featurize ----

struct FeaturizeOpts {
  std::string wav_dir;
  std::string segments;
  std::string out;
  std::string config;
};

int run_featurize(const FeaturizeOpts& opt) {
  std::ifstream in(opt.segments);
  if (!in) throw ParamError("cannot open segments file: " + opt.segments);
  const fs::path out(opt.out);
  fs::create_directories(out);

  FrontendConfig frontend;
  json items = json::array();
  std::size_t failures = 0, index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    // wav_path,start_ms,end_ms,word_id
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 4) {
      std::cerr << opt.segments << " line " << line_no << ": expected 4 comma fields\n";
      ++failures;
      continue;
    }
    try {
      const fs::path wav_path = fs::path(fields[0]).is_absolute()
                                    ? fs::path(fields[0])
                                    : fs::path(opt.wav_dir) / fields[0];
      const std::size_t start_ms = std::stoul(fields[1]);
      const std::size_t end_ms = std::stoul(fields[2]);
      const std::string& word = fields[3];
      if (end_ms <= start_ms) throw ParamError("segment end must exceed start");

      Waveform wave = read_wav(wav_path);
      if (wave.sample_rate != kSampleRate) {
        throw FormatError(wav_path.string() + ": expected 16000 Hz, got " +
                          std::to_string(wave.sample_rate));
      }
      const std::size_t begin = start_ms * (kSampleRate / 1000);
      const std::size_t end = end_ms * (kSampleRate / 1000);
      if (end > wave.samples.size()) {
        throw ParamError(wav_path.string() + ": segment exceeds waveform length");
      }
      Waveform segment;
      segment.sample_rate = kSampleRate;
      segment.samples.assign(wave.samples.begin() + begin, wave.samples.begin() + end);
      Tensor spec = word_spectrogram(segment, frontend);

      char name[128];
      std::snprintf(name, sizeof(name), "seg_%06zu_%s.mmtf", index, word.c_str());
      write_tensor(out / name, spec);
      items.push_back({{"tensor", name},
                       {"word", word},
                       {"source", fields[0]},
                       {"start_ms", start_ms},
                       {"end_ms", end_ms}});
      ++index;
    } catch (const Error& e) {
      std::cerr << "featurize: " << e.what() << "\n";
      ++failures;
    }
  }
  write_json(out / "index.json", json{{"items", items}});
  record_config(out, "featurize",
                json{{"wav-dir", opt.wav_dir}, {"segments", opt.segments}, {"out", opt.out}});
  std::cout << "featurized " << index << " segments, " << failures << " failures\n";
  return failures == 0 ? 0 : 1;
}

// ------------------------------------------------------------- pretrain ----

struct PretrainOpts {
  std::string data;
  std::string out;
  std::string config;
  std::size_t epochs = 200;
  double lr = 1e-2;
  double momentum = 0.9;
  std::size_t batch = 64;
  double val_fraction = 0.0;
  double target_top1 = 0.0;
  std::size_t conv_channels = 64;
  std::size_t fc_dim = 1024;
  double dropout = 0.5;
  std::uint64_t seed = 0;
};

std::pair<std::vector<LabeledSpectrogram>, std::vector<std::string>> load_labeled_dir(
    const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw DataError("cannot open " + (dir / "index.json").string());
  json index;
  try {
    in >> index;
  } catch (const json::parse_error& e) {
    throw DataError((dir / "index.json").string() + ": invalid JSON: " + e.what());
  }
  std::vector<std::pair<Tensor, std::string>> raw;
  for (const json& item : index.at("items")) {
    raw.emplace_back(read_tensor(dir / item.at("tensor").get<std::string>()),
                     item.at("word").get<std::string>());
  }
  std::set<std::string> words;
  for (const auto& [t, w] : raw) words.insert(w);
  std::vector<std::string> vocab(words.begin(), words.end());
  std::map<std::string, std::size_t> label_of;
  for (std::size_t i = 0; i < vocab.size(); ++i) label_of[vocab[i]] = i;

  std::vector<LabeledSpectrogram> data;
  data.reserve(raw.size());
  for (auto& [t, w] : raw) data.push_back({std::move(t), label_of.at(w)});
  return {std::move(data), std::move(vocab)};
}

int run_pretrain(const PretrainOpts& opt) {
  auto [all, vocab] = load_labeled_dir(opt.data);
  if (all.empty()) throw DataError("pretrain: no labeled spectrograms in " + opt.data);

  std::vector<LabeledSpectrogram> train, val;
  if (opt.val_fraction > 0.0) {
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(opt.seed ^ 0x5eed);
    rng.shuffle(order);
    const std::size_t n_val = static_cast<std::size_t>(opt.val_fraction *
                                                       static_cast<double>(all.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_val ? val : train).push_back(all[order[i]]);
    }
  } else {
    train = std::move(all);
  }

  WordCnnConfig arch;
  arch.bands = train.front().spec.dim(0);
  arch.frames = train.front().spec.dim(1);
  arch.conv_channels = opt.conv_channels;
  arch.fc_dim = opt.fc_dim;
  arch.dropout_rate = opt.dropout;
  arch.vocab_size = vocab.size();

  PretrainConfig cfg;
  cfg.epochs = opt.epochs;
  cfg.learning_rate = opt.lr;
  cfg.momentum = opt.momentum;
  cfg.batch_size = opt.batch;
  cfg.seed = opt.seed;
  cfg.target_train_top1 = opt.target_top1;

  PretrainResult result = pretrain(train, val, arch, cfg);

  json epochs = json::array();
  for (const auto& e : result.epochs) {
    json row{{"train_loss", e.train_loss},
             {"train_top1", e.train_top1},
             {"train_top5", e.train_top5},
             {"learning_rate", e.learning_rate}};
    if (e.val_top1) {
      row["val_top1"] = *e.val_top1;
      row["val_top5"] = *e.val_top5;
    }
    epochs.push_back(row);
  }

  const fs::path out(opt.out);
  save_word_cnn(out, result.params, json{{"vocab", vocab}, {"seed", opt.seed}});
  write_json(out / "metrics.json", json{{"epochs", epochs}});
  record_config(out, "pretrain",
                json{{"data", opt.data},
                     {"out", opt.out},
                     {"epochs", opt.epochs},
                     {"lr", opt.lr},
                     {"momentum", opt.momentum},
                     {"batch", opt.batch},
                     {"val-fraction", opt.val_fraction},
                     {"target-top1", opt.target_top1},
                     {"conv-channels", opt.conv_channels},
                     {"fc-dim", opt.fc_dim},
                     {"dropout", opt.dropout},
                     {"seed", opt.seed}});
  if (!result.epochs.empty()) {
    const auto& last = result.epochs.back();
    std::printf("pretrain: %zu epochs, train top-1 %.4f top-5 %.4f\n", result.epochs.size(),
                last.train_top1, last.train_top5);
  }
  return 0;
}

// ----------------------------------------------------------------- embed ----

struct EmbedOpts {
  std::string data;
  std::string model;
  std::string out;
  std::string config;
};

int run_embed(const EmbedOpts& opt) {
  Dataset dataset = load_dataset(opt.data);
  WordCnnParams params = load_word_cnn(opt.model);

  std::vector<CaptionRecord> embedded;
  embedded.reserve(dataset.captions.size());
  for (const auto& cap : dataset.captions) {
    CaptionRecord out_cap = cap;
    if (cap.words.empty()) {
      if (cap.spectrogram_paths.empty()) {
        throw DataError("embed: caption '" + cap.caption_id + "' has no spectrograms");
      }
      Tensor words({cap.spectrogram_paths.size(), params.cfg.fc_dim});
      for (std::size_t t = 0; t < cap.spectrogram_paths.size(); ++t) {
        Tensor spec = read_tensor(cap.spectrogram_paths[t]);
        Tensor e = embed_word(spec, params);
        std::copy(e.data(), e.data() + e.size(), words.data() + t * params.cfg.fc_dim);
      }
      out_cap.words = std::move(words);
      out_cap.spectrogram_paths.clear();
    }
    embedded.push_back(std::move(out_cap));
  }

  const fs::path out(opt.out);
  fs::create_directories(out);
  write_dataset(out, "manifest.jsonl", dataset.images, embedded);
  record_config(out, "embed",
                json{{"data", opt.data}, {"model", opt.model}, {"out", opt.out}});
  std::cout << "embedded " << embedded.size() << " captions\n";
  return 0;
}

// ----------------------------------------------------------------- train ----

struct TrainOpts {
  std::string data;
  std::string out;
  std::string config;
  std::size_t h = 512;
  double lr = 1e-6;
  double momentum = 0.9;
  std::size_t batch_images = 40;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
};

int run_train(const TrainOpts& opt) {
  Dataset dataset = load_dataset(opt.data);
  if (dataset.images.empty()) throw DataError("train: dataset has no images");
  for (const auto& cap : dataset.captions) {
    if (cap.words.empty()) {
      throw DataError("train: caption '" + cap.caption_id +
                      "' has no word vectors; run embed first");
    }
  }

  FitConfig cfg;
  cfg.h = opt.h;
  cfg.learning_rate = opt.lr;
  cfg.momentum = opt.momentum;
  cfg.batch_images = opt.batch_images;
  cfg.epochs = opt.epochs;
  cfg.seed = opt.seed;

  FitResult result = fit(dataset.images, dataset.captions, cfg);

  const fs::path out(opt.out);
  save_align(out, result.params,
             json{{"seed", opt.seed},
                  {"config",
                   {{"lr", opt.lr},
                    {"momentum", opt.momentum},
                    {"batch_images", opt.batch_images},
                    {"epochs", opt.epochs}}}});
  write_json(out / "cost_trace.json", json{{"epoch_costs", result.epoch_costs}});
  record_config(out, "train",
                json{{"data", opt.data},
                     {"out", opt.out},
                     {"embed-dim", opt.h},
                     {"lr", opt.lr},
                     {"momentum", opt.momentum},
                     {"batch-images", opt.batch_images},
                     {"epochs", opt.epochs},
                     {"seed", opt.seed}});
  if (!result.epoch_costs.empty()) {
    std::printf("train: %zu epochs, cost %.4f -> %.4f\n", result.epoch_costs.size(),
                result.epoch_costs.front(), result.epoch_costs.back());
  }
  return 0;
}

// ------------------------------------------------------------------ eval ----

struct EvalOpts {
  std::string data;
  std::string model;
  std::string out;
  std::string config;
  std::size_t k = 10;
  bool csv = false;
};

int run_eval(const EvalOpts& opt) {
  Dataset dataset = load_dataset(opt.data);
  if (dataset.images.empty()) throw DataError("eval: dataset has no images");
  AlignParams params = load_align(opt.model);

  EmbeddedImagePool image_pool = EmbeddedImagePool::build(dataset.images, params);
  EmbeddedCaptionPool caption_pool = EmbeddedCaptionPool::build(dataset.captions, params);

  std::vector<RankingResult> search_results;
  search_results.reserve(dataset.captions.size());
  for (std::size_t c = 0; c < dataset.captions.size(); ++c) {
    search_results.push_back(image_search(caption_pool.ids[c], caption_pool.word_embeds[c],
                                          caption_pool.image_ids[c], image_pool));
  }
  std::vector<RankingResult> annotation_results;
  annotation_results.reserve(dataset.images.size());
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    annotation_results.push_back(
        image_annotation(image_pool.ids[i], image_pool.region_embeds[i], caption_pool));
  }

  const double search_recall = recall_at_k(search_results, opt.k);
  const double annotation_recall = recall_at_k(annotation_results, opt.k);

  json report{{"search", evaluation_report("image_search", dataset.images.size(), opt.k,
                                           search_recall, search_results)},
              {"annotation",
               evaluation_report("image_annotation", dataset.captions.size(), opt.k,
                                 annotation_recall, annotation_results)}};

  if (!opt.out.empty()) {
    const fs::path out(opt.out);
    write_json(out / "report.json", report);
    if (opt.csv) {
      std::ofstream s(out / "search.csv", std::ios::trunc);
      s << evaluation_csv(search_results);
      std::ofstream a(out / "annotation.csv", std::ios::trunc);
      a << evaluation_csv(annotation_results);
    }
    record_config(out, "eval",
                  json{{"data", opt.data},
                       {"model", opt.model},
                       {"out", opt.out},
                       {"k", opt.k},
                       {"csv", opt.csv}});
  } else {
    std::cout << report.dump(2) << "\n";
  }
  std::printf("search R@%zu = %.4f, annotation R@%zu = %.4f\n", opt.k, search_recall, opt.k,
              annotation_recall);
  return 0;
}

// ----------------------------------------------------------------- align ----

struct AlignOpts {
  std::string data;
  std::string model;
  std::string out;
  std::string config;
  bool svg = false;
};

int run_align(const AlignOpts& opt) {
  Dataset dataset = load_dataset(opt.data);
  AlignParams params = load_align(opt.model);

  std::map<std::string, const ImageRecord*> image_of;
  for (const auto& im : dataset.images) image_of[im.image_id] = &im;

  json all = json::array();
  std::size_t displayable = 0, total_words = 0;
  for (const auto& cap : dataset.captions) {
    if (cap.words.empty()) {
      throw DataError("align: caption '" + cap.caption_id + "' has no word vectors");
    }
    auto it = image_of.find(cap.image_id);
    if (it == image_of.end()) {
      throw DataError("align: caption '" + cap.caption_id + "' references unknown image");
    }
    auto alignments = infer_alignment(*it->second, cap, params);
    for (const auto& a : alignments) {
      if (a.score > 0.0) ++displayable;
    }
    total_words += alignments.size();
    all.push_back(alignment_to_json(cap, alignments));
    if (opt.svg && !opt.out.empty()) {
      const fs::path svg_dir = fs::path(opt.out) / "svg";
      fs::create_directories(svg_dir);
      std::ofstream s(svg_dir / (cap.caption_id + ".svg"), std::ios::trunc);
      s << alignment_to_svg(cap, alignments, it->second->regions.dim(0));
    }
  }

  if (!opt.out.empty()) {
    write_json(fs::path(opt.out) / "alignments.json", all);
    record_config(fs::path(opt.out), "align",
                  json{{"data", opt.data},
                       {"model", opt.model},
                       {"out", opt.out},
                       {"svg", opt.svg}});
  } else {
    std::cout << all.dump(2) << "\n";
  }
  std::printf("aligned %zu words, %zu displayable links\n", total_words, displayable);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint audio-visual embedding toolkit"};
  app.require_subcommand(1);

  SynthOpts synth_opts;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic datasets");
  auto* sy_task = synth_cmd->add_option("--task", synth_opts.task, "pairs | words");
  auto* sy_out = synth_cmd->add_option("--out", synth_opts.out, "output directory");
  sy_out->required();
  auto* sy_concepts = synth_cmd->add_option("--concepts", synth_opts.concepts);
  auto* sy_di = synth_cmd->add_option("--d-image", synth_opts.d_image);
  auto* sy_dw = synth_cmd->add_option("--d-word", synth_opts.d_word);
  auto* sy_wpc = synth_cmd->add_option("--words-per-caption", synth_opts.words_per_caption);
  auto* sy_cpi = synth_cmd->add_option("--captions-per-image", synth_opts.captions_per_image);
  auto* sy_images = synth_cmd->add_option("--images", synth_opts.images);
  auto* sy_test = synth_cmd->add_option("--test-images", synth_opts.test_images);
  auto* sy_noise = synth_cmd->add_option("--noise", synth_opts.noise);
  auto* sy_classes = synth_cmd->add_option("--classes", synth_opts.classes);
  auto* sy_per_class = synth_cmd->add_option("--per-class", synth_opts.per_class);
  auto* sy_wnoise = synth_cmd->add_option("--word-noise", synth_opts.word_noise);
  auto* sy_seed = synth_cmd->add_option("--seed", synth_opts.seed);
  synth_cmd->add_option("--config", synth_opts.config, "JSON config file");

  FeaturizeOpts feat_opts;
  CLI::App* feat_cmd = app.add_subcommand("featurize", "wav segments -> spectrogram tensors");
  auto* fe_wav = feat_cmd->add_option("--wav-dir", feat_opts.wav_dir);
  auto* fe_seg = feat_cmd->add_option("--segments", feat_opts.segments);
  fe_seg->required();
  auto* fe_out = feat_cmd->add_option("--out", feat_opts.out);
  fe_out->required();
  feat_cmd->add_option("--config", feat_opts.config, "JSON config file");

  PretrainOpts pre_opts;
  CLI::App* pre_cmd = app.add_subcommand("pretrain", "train the word classifier");
  auto* pr_data = pre_cmd->add_option("--data", pre_opts.data);
  pr_data->required();
  auto* pr_out = pre_cmd->add_option("--out", pre_opts.out);
  pr_out->required();
  auto* pr_epochs = pre_cmd->add_option("--epochs", pre_opts.epochs);
  auto* pr_lr = pre_cmd->add_option("--lr", pre_opts.lr);
  auto* pr_mom = pre_cmd->add_option("--momentum", pre_opts.momentum);
  auto* pr_batch = pre_cmd->add_option("--batch", pre_opts.batch);
  auto* pr_val = pre_cmd->add_option("--val-fraction", pre_opts.val_fraction);
  auto* pr_target = pre_cmd->add_option("--target-top1", pre_opts.target_top1);
  auto* pr_cc = pre_cmd->add_option("--conv-channels", pre_opts.conv_channels);
  auto* pr_fc = pre_cmd->add_option("--fc-dim", pre_opts.fc_dim);
  auto* pr_drop = pre_cmd->add_option("--dropout", pre_opts.dropout);
  auto* pr_seed = pre_cmd->add_option("--seed", pre_opts.seed);
  pre_cmd->add_option("--config", pre_opts.config, "JSON config file");

  EmbedOpts embed_opts;
  CLI::App* embed_cmd = app.add_subcommand("embed", "spectrograms -> word vectors");
  auto* em_data = embed_cmd->add_option("--data", embed_opts.data);
  em_data->required();
  auto* em_model = embed_cmd->add_option("--model", embed_opts.model);
  em_model->required();
  auto* em_out = embed_cmd->add_option("--out", embed_opts.out);
  em_out->required();
  embed_cmd->add_option("--config", embed_opts.config, "JSON config file");

  TrainOpts train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "fit the alignment model");
  auto* tr_data = train_cmd->add_option("--data", train_opts.data);
  tr_data->required();
  auto* tr_out = train_cmd->add_option("--out", train_opts.out);
  tr_out->required();
  auto* tr_h = train_cmd->add_option("--embed-dim", train_opts.h, "joint space dimension h");
  auto* tr_lr = train_cmd->add_option("--lr", train_opts.lr);
  auto* tr_mom = train_cmd->add_option("--momentum", train_opts.momentum);
  auto* tr_batch = train_cmd->add_option("--batch-images", train_opts.batch_images);
  auto* tr_epochs = train_cmd->add_option("--epochs", train_opts.epochs);
  auto* tr_seed = train_cmd->add_option("--seed", train_opts.seed);
  train_cmd->add_option("--config", train_opts.config, "JSON config file");

  EvalOpts eval_opts;
  CLI::App* eval_cmd = app.add_subcommand("eval", "retrieval recall@k report");
  auto* ev_data = eval_cmd->add_option("--data", eval_opts.data);
  ev_data->required();
  auto* ev_model = eval_cmd->add_option("--model", eval_opts.model);
  ev_model->required();
  auto* ev_out = eval_cmd->add_option("--out", eval_opts.out);
  auto* ev_k = eval_cmd->add_option("--k", eval_opts.k);
  auto* ev_csv = eval_cmd->add_flag("--csv", eval_opts.csv);
  eval_cmd->add_option("--config", eval_opts.config, "JSON config file");

  AlignOpts align_opts;
  CLI::App* align_cmd = app.add_subcommand("align", "word-to-region alignment links");
  auto* al_data = align_cmd->add_option("--data", align_opts.data);
  al_data->required();
  auto* al_model = align_cmd->add_option("--model", align_opts.model);
  al_model->required();
  auto* al_out = align_cmd->add_option("--out", align_opts.out);
  auto* al_svg = align_cmd->add_flag("--svg", align_opts.svg);
  align_cmd->add_option("--config", align_opts.config, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed()) {
      ConfigMerge merge(synth_opts.config);
      merge.field("task", sy_task, synth_opts.task);
      merge.field("out", sy_out, synth_opts.out);
      merge.field("concepts", sy_concepts, synth_opts.concepts);
      merge.field("d-image", sy_di, synth_opts.d_image);
      merge.field("d-word", sy_dw, synth_opts.d_word);
      merge.field("words-per-caption", sy_wpc, synth_opts.words_per_caption);
      merge.field("captions-per-image", sy_cpi, synth_opts.captions_per_image);
      merge.field("images", sy_images, synth_opts.images);
      merge.field("test-images", sy_test, synth_opts.test_images);
      merge.field("noise", sy_noise, synth_opts.noise);
      merge.field("classes", sy_classes, synth_opts.classes);
      merge.field("per-class", sy_per_class, synth_opts.per_class);
      merge.field("word-noise", sy_wnoise, synth_opts.word_noise);
      merge.field("seed", sy_seed, synth_opts.seed);
      merge.finish();
      return run_synth(synth_opts);
    }
    if (feat_cmd->parsed()) {
      ConfigMerge merge(feat_opts.config);
      merge.field("wav-dir", fe_wav, feat_opts.wav_dir);
      merge.field("segments", fe_seg, feat_opts.segments);
      merge.field("out", fe_out, feat_opts.out);
      merge.finish();
      return run_featurize(feat_opts);
    }
    if (pre_cmd->parsed()) {
      ConfigMerge merge(pre_opts.config);
      merge.field("data", pr_data, pre_opts.data);
      merge.field("out", pr_out, pre_opts.out);
      merge.field("epochs", pr_epochs, pre_opts.epochs);
      merge.field("lr", pr_lr, pre_opts.lr);
      merge.field("momentum", pr_mom, pre_opts.momentum);
      merge.field("batch", pr_batch, pre_opts.batch);
      merge.field("val-fraction", pr_val, pre_opts.val_fraction);
      merge.field("target-top1", pr_target, pre_opts.target_top1);
      merge.field("conv-channels", pr_cc, pre_opts.conv_channels);
      merge.field("fc-dim", pr_fc, pre_opts.fc_dim);
      merge.field("dropout", pr_drop, pre_opts.dropout);
      merge.field("seed", pr_seed, pre_opts.seed);
      merge.finish();
      return run_pretrain(pre_opts);
    }
    if (embed_cmd->parsed()) {
      ConfigMerge merge(embed_opts.config);
      merge.field("data", em_data, embed_opts.data);
      merge.field("model", em_model, embed_opts.model);
      merge.field("out", em_out, embed_opts.out);
      merge.finish();
      return run_embed(embed_opts);
    }
    if (train_cmd->parsed()) {
      ConfigMerge merge(train_opts.config);
      merge.field("data", tr_data, train_opts.data);
      merge.field("out", tr_out, train_opts.out);
      merge.field("embed-dim", tr_h, train_opts.h);
      merge.field("lr", tr_lr, train_opts.lr);
      merge.field("momentum", tr_mom, train_opts.momentum);
      merge.field("batch-images", tr_batch, train_opts.batch_images);
      merge.field("epochs", tr_epochs, train_opts.epochs);
      merge.field("seed", tr_seed, train_opts.seed);
      merge.finish();
      return run_train(train_opts);
    }
    if (eval_cmd->parsed()) {
      ConfigMerge merge(eval_opts.config);
      merge.field("data", ev_data, eval_opts.data);
      merge.field("model", ev_model, eval_opts.model);
      merge.field("out", ev_out, eval_opts.out);
      merge.field("k", ev_k, eval_opts.k);
      merge.field("csv", ev_csv, eval_opts.csv);
      merge.finish();
      return run_eval(eval_opts);
    }
    if (align_cmd->parsed()) {
      ConfigMerge merge(align_opts.config);
      merge.field("data", al_data, align_opts.data);
      merge.field("model", al_model, align_opts.model);
      merge.field("out", al_out, align_opts.out);
      merge.field("svg", al_svg, align_opts.svg);
      merge.finish();
      return run_align(align_opts);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
