#include <doctest.h>

#include <cmath>
#include <functional>

#include "specembed/errors.hpp"
#include "specembed/grad_check.hpp"
#include "specembed/synth.hpp"
#include "specembed/word_cnn.hpp"
#include "test_util.hpp"

using namespace specembed;
using specembed::testing::random_tensor;

namespace {

// Miniature configuration mirroring the layer types of the full network:
// 8x10 input, 4 conv channels, 3008-analogue flat dim 12, V=3.
WordCnnConfig mini_config() {
  WordCnnConfig cfg;
  cfg.bands = 8;
  cfg.frames = 10;
  cfg.conv_channels = 4;
  cfg.filter_time = 3;
  cfg.freq_pad = 1;
  cfg.lrn = LrnSpec{5, 1e-2, 0.75, 1.0};
  cfg.pool = PoolSpec{3, 4, 1, 2};
  cfg.fc_dim = 6;
  cfg.dropout_rate = 0.5;
  cfg.vocab_size = 3;
  return cfg;
}

// Kinks would poison finite differences: require all ReLU preactivations and
// pool gaps to be comfortably away from the boundaries.
bool fd_safe(const WordCnnTrace& trace, const WordCnnConfig& cfg) {
  for (std::size_t i = 0; i < trace.conv_out.size(); ++i) {
    if (std::abs(trace.conv_out[i]) < 1e-3) return false;
  }
  for (std::size_t i = 0; i < trace.fc1_z.size(); ++i) {
    if (std::abs(trace.fc1_z[i]) < 1e-3) return false;
  }
  for (std::size_t i = 0; i < trace.fc2_z.size(); ++i) {
    if (std::abs(trace.fc2_z[i]) < 1e-3) return false;
  }
  // top-two gap within every pooling window of the LRN output
  const Tensor& x = trace.lrn_out;
  const std::size_t oh = cfg.pool_out_h(), ow = cfg.pool_out_w();
  for (std::size_t c = 0; c < cfg.conv_channels; ++c) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t q = 0; q < ow; ++q) {
        double best = -1e18, second = -1e18;
        for (std::size_t pr = 0; pr < cfg.pool.pool_h; ++pr) {
          for (std::size_t pc = 0; pc < cfg.pool.pool_w; ++pc) {
            const double v =
                x(c, r * cfg.pool.stride_h + pr, q * cfg.pool.stride_w + pc);
            if (v > best) {
              second = best;
              best = v;
            } else if (v > second) {
              second = v;
            }
          }
        }
        if (best - second < 1e-3) return false;
      }
    }
  }
  return true;
}

double eval_loss(const Tensor& spec, const WordCnnParams& params, std::size_t label) {
  WordCnnTrace t =
      word_cnn_forward_trace(spec, params, Mode::eval, nullptr, label, true);
  return t.loss;
}

// Gradient components below the central-difference noise floor
// (eps_machine * |f| / (2 eps) ~ 5e-12 for this O(1) loss) carry no signal;
// screen coordinates where analytic and numeric agree on being tiny.
double fd_max_rel_error_floored(const std::function<double(const Tensor&)>& f,
                                const Tensor& x, const Tensor& analytic,
                                double eps = 1e-5, double floor = 1e-6) {
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double f_plus = f(probe);
    probe[i] = orig - eps;
    const double f_minus = f(probe);
    probe[i] = orig;
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    if (std::max(std::abs(analytic[i]), std::abs(numeric)) < floor) continue;
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace

TEST_SUITE("word_cnn") {

TEST_CASE("estimate_mean_spectrogram basics and recomputation oracle") {
  Rng rng(3);
  Tensor a = random_tensor({4, 5}, rng);
  CHECK(estimate_mean_spectrogram({a}) == a);

  Tensor neg(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) neg[i] = -a[i];
  Tensor zero = estimate_mean_spectrogram({a, neg});
  for (std::size_t i = 0; i < zero.size(); ++i) CHECK(zero[i] == 0.0);

  std::vector<Tensor> grids;
  for (int i = 0; i < 100; ++i) grids.push_back(random_tensor({4, 5}, rng));
  Tensor mean = estimate_mean_spectrogram(grids);
  for (std::size_t cell = 0; cell < mean.size(); ++cell) {
    double s = 0.0;
    for (const Tensor& g : grids) s += g[cell];
    CHECK(std::abs(mean[cell] - s / 100.0) < 1e-12);
  }

  CHECK_THROWS_AS(estimate_mean_spectrogram({}), ParamError);
  CHECK_THROWS_AS(estimate_mean_spectrogram({a, Tensor({4, 6})}), ShapeError);
}

TEST_CASE("forward shape trace matches the architecture arithmetic") {
  WordCnnConfig cfg;
  cfg.vocab_size = 7;
  CHECK(cfg.conv_out_h() == 3);
  CHECK(cfg.conv_out_w() == 96);
  CHECK(cfg.pool_out_h() == 1);
  CHECK(cfg.pool_out_w() == 47);
  CHECK(cfg.flat_dim() == 3008);

  WordCnnParams params = WordCnnParams::init(cfg, 1);
  Rng rng(2);
  Tensor spec = random_tensor({40, 100}, rng);
  WordCnnOutput out = word_cnn_forward(spec, params, Mode::eval);
  CHECK(out.logits.dims() == std::vector<std::size_t>{7});
  CHECK(out.embedding.dims() == std::vector<std::size_t>{1024});

  CHECK_THROWS_AS(word_cnn_forward(Tensor({40, 90}), params, Mode::eval), ShapeError);
}

TEST_CASE("input equal to the mean spectrogram depends only on biases") {
  WordCnnConfig cfg = mini_config();
  WordCnnParams params = WordCnnParams::init(cfg, 5);
  Rng rng(6);
  params.mean_spectrogram = random_tensor({cfg.bands, cfg.frames}, rng);
  for (std::size_t i = 0; i < params.conv_b.size(); ++i) params.conv_b[i] = rng.gaussian();

  WordCnnOutput out = word_cnn_forward(params.mean_spectrogram, params, Mode::eval);

  // Same input through params with identical biases but different filters:
  // the conv sees all zeros, so logits cannot depend on the filters.
  WordCnnParams other = params;
  other.conv_w = random_tensor(params.conv_w.dims(), rng);
  WordCnnOutput out2 = word_cnn_forward(params.mean_spectrogram, other, Mode::eval);
  CHECK(out.logits == out2.logits);
  CHECK(out.embedding == out2.embedding);
}

TEST_CASE("eval forward is bit-deterministic") {
  WordCnnConfig cfg = mini_config();
  WordCnnParams params = WordCnnParams::init(cfg, 7);
  Rng rng(8);
  Tensor spec = random_tensor({cfg.bands, cfg.frames}, rng);
  WordCnnOutput a = word_cnn_forward(spec, params, Mode::eval, 1);
  WordCnnOutput b = word_cnn_forward(spec, params, Mode::eval, 2);
  CHECK(a.logits == b.logits);
  CHECK(a.embedding == b.embedding);
}

TEST_CASE("embeddings are 1024-long, nonnegative, and input-determined") {
  WordCnnConfig cfg;
  cfg.vocab_size = 5;
  WordCnnParams params = WordCnnParams::init(cfg, 11);
  Rng rng(12);
  Tensor spec = random_tensor({40, 100}, rng);
  Tensor e1 = embed_word(spec, params);
  Tensor e2 = embed_word(spec, params);
  CHECK(e1.size() == 1024);
  for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] >= 0.0);
  CHECK(e1 == e2);
}

TEST_CASE("embedding nonnegativity holds across random inputs") {
  WordCnnConfig cfg = mini_config();
  WordCnnParams params = WordCnnParams::init(cfg, 13);
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor spec = random_tensor({cfg.bands, cfg.frames}, rng, 3.0);
    WordCnnTrace t = word_cnn_forward_trace(spec, params, Mode::eval, nullptr, 0, false);
    for (std::size_t i = 0; i < t.fc2_relu.size(); ++i) CHECK(t.fc2_relu[i] >= 0.0);
  }
}

TEST_CASE("miniature stack passes finite differences on every parameter group") {
  const WordCnnConfig cfg = mini_config();
  int checked = 0;
  for (int seed = 0; checked < 20 && seed < 200; ++seed) {
    Rng rng(900 + seed);
    WordCnnParams params = WordCnnParams::init(cfg, 900 + seed);
    Tensor spec = random_tensor({cfg.bands, cfg.frames}, rng);
    const std::size_t label = rng.uniform_index(cfg.vocab_size);

    WordCnnTrace trace = word_cnn_forward_trace(spec, params, Mode::eval, nullptr, label, true);
    if (!fd_safe(trace, cfg)) continue;
    ++checked;

    auto grads = zero_like_grads(params);
    word_cnn_backward_accumulate(trace, params, label, grads);

    for (auto& [name, tensor_ptr] : params.param_refs()) {
      Tensor* target = tensor_ptr;
      const Tensor original = *target;
      auto f = [&, target](const Tensor& probe) {
        *target = probe;
        const double loss = eval_loss(spec, params, label);
        *target = original;
        return loss;
      };
      const double err = fd_max_rel_error_floored(f, original, grads.at(name));
      INFO("param group ", name, " seed ", seed);
      CHECK(err < 1e-5);
    }
  }
  CHECK(checked == 20);
}

TEST_CASE("one small SGD step on a single example decreases its loss") {
  const WordCnnConfig cfg = mini_config();
  WordCnnParams params = WordCnnParams::init(cfg, 77);
  Rng rng(78);
  Tensor spec = random_tensor({cfg.bands, cfg.frames}, rng);
  const std::size_t label = 1;

  const double before = eval_loss(spec, params, label);
  WordCnnTrace trace = word_cnn_forward_trace(spec, params, Mode::eval, nullptr, label, true);
  auto grads = zero_like_grads(params);
  word_cnn_backward_accumulate(trace, params, label, grads);
  SgdMomentum opt(1e-4, 0.0);
  opt.step(params.param_refs(), grads);
  const double after = eval_loss(spec, params, label);
  CHECK(after < before);
}

TEST_CASE("pretrain on a tiny separable problem learns it and validates labels") {
  ToneGridConfig tones;
  tones.n_classes = 3;
  tones.per_class = 4;
  tones.bands = 8;
  tones.frames = 10;
  tones.noise_sigma = 0.05;
  tones.seed = 5;
  auto data = generate_tone_spectrograms(tones);

  WordCnnConfig arch = mini_config();
  arch.fc_dim = 16;
  arch.dropout_rate = 0.0;
  PretrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 5e-2;
  cfg.batch_size = 6;
  cfg.seed = 9;
  cfg.target_train_top1 = 1.0;
  PretrainResult res = pretrain(data, {}, arch, cfg);

  REQUIRE(!res.epochs.empty());
  for (const auto& e : res.epochs) CHECK(e.train_top5 >= e.train_top1);
  CHECK(res.epochs.back().train_top1 == doctest::Approx(1.0));

  // out-of-range label rejected
  auto bad = data;
  bad[0].label = 99;
  CHECK_THROWS_AS(pretrain(bad, {}, arch, cfg), ParamError);
}

TEST_CASE("pretrain is bit-deterministic under a fixed seed") {
  ToneGridConfig tones;
  tones.n_classes = 3;
  tones.per_class = 2;
  tones.bands = 8;
  tones.frames = 10;
  tones.seed = 21;
  auto data = generate_tone_spectrograms(tones);

  WordCnnConfig arch = mini_config();
  PretrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 4;
  cfg.seed = 33;
  PretrainResult a = pretrain(data, {}, arch, cfg);
  PretrainResult b = pretrain(data, {}, arch, cfg);
  CHECK(a.params.conv_w == b.params.conv_w);
  CHECK(a.params.fc1_w == b.params.fc1_w);
  CHECK(a.params.out_w == b.params.out_w);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].train_loss == b.epochs[i].train_loss);
  }
}

TEST_CASE("within-class embedding similarity beats between-class on held-out tones") {
  ToneGridConfig tones;
  tones.n_classes = 4;
  tones.per_class = 5;  // train on 4, hold out 1
  tones.bands = 8;
  tones.frames = 10;
  tones.noise_sigma = 0.05;
  tones.seed = 41;
  auto all = generate_tone_spectrograms(tones);

  std::vector<LabeledSpectrogram> train, held;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i % tones.per_class == tones.per_class - 1) {
      held.push_back(all[i]);
    } else {
      train.push_back(all[i]);
    }
  }

  WordCnnConfig arch = mini_config();
  arch.vocab_size = tones.n_classes;
  arch.fc_dim = 16;
  arch.dropout_rate = 0.0;
  PretrainConfig cfg;
  cfg.epochs = 80;
  cfg.learning_rate = 5e-2;
  cfg.batch_size = 8;
  cfg.seed = 43;
  cfg.target_train_top1 = 1.0;
  PretrainResult res = pretrain(train, {}, arch, cfg);

  auto cosine = [](const Tensor& a, const Tensor& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
  };

  std::vector<Tensor> held_embeds;
  for (const auto& ex : held) held_embeds.push_back(embed_word(ex.spec, res.params));
  std::vector<Tensor> train_embeds;
  for (const auto& ex : train) train_embeds.push_back(embed_word(ex.spec, res.params));

  double within = 0.0, between = 0.0;
  std::size_t n_within = 0, n_between = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    for (std::size_t j = 0; j < train.size(); ++j) {
      const double c = cosine(held_embeds[i], train_embeds[j]);
      if (held[i].label == train[j].label) {
        within += c;
        ++n_within;
      } else {
        between += c;
        ++n_between;
      }
    }
  }
  CHECK(within / static_cast<double>(n_within) >
        between / static_cast<double>(n_between));
}

}  // TEST_SUITE
