#include "specembed/word_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "specembed/errors.hpp"

namespace specembed {

void WordCnnConfig::validate() const {
  if (bands < 1 || frames < 1) throw ParamError("word cnn input dims must be positive");
  if (vocab_size < 1) throw ParamError("vocab_size must be >= 1");
  if (filter_time > frames) throw ParamError("filter_time exceeds input frames");
  if (pool.pool_h > conv_out_h() || pool.pool_w > conv_out_w()) {
    throw ParamError("pool window exceeds conv output");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ParamError("dropout_rate must be in [0, 1)");
}

namespace {

Tensor gaussian_tensor(std::vector<std::size_t> dims, double sigma, Rng& rng) {
  Tensor t(std::move(dims));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = sigma * rng.gaussian();
  return t;
}

}  // namespace

WordCnnParams WordCnnParams::init(const WordCnnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  WordCnnParams p;
  p.cfg = cfg;
  p.mean_spectrogram = Tensor({cfg.bands, cfg.frames});
  const double conv_sigma = 1.0 / std::sqrt(static_cast<double>(cfg.bands * cfg.filter_time));
  p.conv_w = gaussian_tensor({cfg.conv_channels, 1, cfg.bands, cfg.filter_time}, conv_sigma, rng);
  p.conv_b = Tensor({cfg.conv_channels});
  const double fc1_sigma = 1.0 / std::sqrt(static_cast<double>(cfg.flat_dim()));
  p.fc1_w = gaussian_tensor({cfg.fc_dim, cfg.flat_dim()}, fc1_sigma, rng);
  p.fc1_b = Tensor({cfg.fc_dim});
  const double fc2_sigma = 1.0 / std::sqrt(static_cast<double>(cfg.fc_dim));
  p.fc2_w = gaussian_tensor({cfg.fc_dim, cfg.fc_dim}, fc2_sigma, rng);
  p.fc2_b = Tensor({cfg.fc_dim});
  p.out_w = gaussian_tensor({cfg.vocab_size, cfg.fc_dim}, fc2_sigma, rng);
  p.out_b = Tensor({cfg.vocab_size});
  return p;
}

ParamRefs WordCnnParams::param_refs() {
  return {
      {"conv_b", &conv_b}, {"conv_w", &conv_w}, {"fc1_b", &fc1_b}, {"fc1_w", &fc1_w},
      {"fc2_b", &fc2_b},   {"fc2_w", &fc2_w},   {"out_b", &out_b}, {"out_w", &out_w},
  };
}

Tensor estimate_mean_spectrogram(const std::vector<Tensor>& specs) {
  if (specs.empty()) throw ParamError("estimate_mean_spectrogram: empty training set");
  const auto& dims = specs.front().dims();
  Tensor mean(dims);
  for (const Tensor& s : specs) {
    if (s.dims() != dims) {
      throw ShapeError("estimate_mean_spectrogram: mixed dims " + dims_to_string(s.dims()) +
                       " vs " + dims_to_string(dims));
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s[i];
  }
  const double inv = 1.0 / static_cast<double>(specs.size());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] *= inv;
  return mean;
}

WordCnnTrace word_cnn_forward_trace(const Tensor& spec, const WordCnnParams& params,
                                    Mode mode, Rng* dropout_rng, std::size_t label,
                                    bool with_loss) {
  const WordCnnConfig& cfg = params.cfg;
  require_dims(spec, {cfg.bands, cfg.frames}, "word cnn input spectrogram");

  WordCnnTrace t;
  t.centered = Tensor({1, cfg.bands, cfg.frames});
  for (std::size_t i = 0; i < spec.size(); ++i) {
    t.centered[i] = spec[i] - params.mean_spectrogram[i];
  }

  const Conv2dSpec conv_spec{cfg.freq_pad, 0, 1, 1};
  t.conv_out = conv2d(t.centered, params.conv_w, params.conv_b, conv_spec);
  t.conv_relu = relu(t.conv_out);
  t.lrn_out = lrn(t.conv_relu, cfg.lrn);
  t.pooled = maxpool(t.lrn_out, cfg.pool);
  t.flat = Tensor({cfg.flat_dim()});
  std::copy(t.pooled.output.data(), t.pooled.output.data() + t.flat.size(), t.flat.data());

  Rng local_rng(0);
  Rng* rng = dropout_rng ? dropout_rng : &local_rng;

  t.fc1_z = fully_connected(t.flat, params.fc1_w, params.fc1_b);
  t.fc1_relu = relu(t.fc1_z);
  auto drop1 = dropout(t.fc1_relu, cfg.dropout_rate, mode, *rng);
  t.fc1_drop = std::move(drop1.output);
  t.fc1_mask = std::move(drop1.mask);

  t.fc2_z = fully_connected(t.fc1_drop, params.fc2_w, params.fc2_b);
  t.fc2_relu = relu(t.fc2_z);
  auto drop2 = dropout(t.fc2_relu, cfg.dropout_rate, mode, *rng);
  t.fc2_drop = std::move(drop2.output);
  t.fc2_mask = std::move(drop2.mask);

  t.logits = fully_connected(t.fc2_drop, params.out_w, params.out_b);
  if (with_loss) {
    auto sm = softmax_xent(t.logits, label);
    t.loss = sm.loss;
    t.probs = std::move(sm.probs);
  }
  return t;
}

WordCnnOutput word_cnn_forward(const Tensor& spec, const WordCnnParams& params, Mode mode,
                               std::uint64_t seed) {
  Rng rng(seed);
  WordCnnTrace t = word_cnn_forward_trace(spec, params, mode, &rng, 0, false);
  WordCnnOutput out;
  out.logits = std::move(t.logits);
  out.embedding = mode == Mode::eval ? std::move(t.fc2_relu) : std::move(t.fc2_drop);
  return out;
}

Tensor embed_word(const Tensor& spec, const WordCnnParams& params) {
  return word_cnn_forward(spec, params, Mode::eval).embedding;
}

std::map<std::string, Tensor> zero_like_grads(WordCnnParams& params) {
  std::map<std::string, Tensor> grads;
  for (auto& [name, t] : params.param_refs()) grads.emplace(name, Tensor(t->dims()));
  return grads;
}

namespace {

// dW += g outer x; dx = W^T g. Fused to avoid per-example temporaries on the
// large fc matrices.
void fc_backward_accumulate(const Tensor& input, const Tensor& weight, const Tensor& upstream,
                            Tensor& dweight, Tensor& dbias, Tensor& dinput) {
  const std::size_t k = weight.dim(0), d = weight.dim(1);
  const double* x = input.data();
  double* dx = dinput.data();
  std::fill(dx, dx + d, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const double g = upstream[r];
    dbias[r] += g;
    const double* w_row = weight.data() + r * d;
    double* dw_row = dweight.data() + r * d;
    if (g == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) {
      dw_row[j] += g * x[j];
      dx[j] += g * w_row[j];
    }
  }
}

}  // namespace

void word_cnn_backward_accumulate(const WordCnnTrace& trace, const WordCnnParams& params,
                                  std::size_t label, std::map<std::string, Tensor>& grads) {
  const WordCnnConfig& cfg = params.cfg;
  if (trace.probs.empty()) throw ParamError("word_cnn_backward_accumulate: trace has no loss");

  Tensor dlogits = softmax_xent_backward(trace.probs, label);

  Tensor dfc2_drop({cfg.fc_dim});
  fc_backward_accumulate(trace.fc2_drop, params.out_w, dlogits, grads.at("out_w"),
                         grads.at("out_b"), dfc2_drop);

  Tensor dfc2_relu = dropout_backward(dfc2_drop, trace.fc2_mask);
  Tensor dfc2_z = relu_backward(trace.fc2_z, dfc2_relu);

  Tensor dfc1_drop({cfg.fc_dim});
  fc_backward_accumulate(trace.fc1_drop, params.fc2_w, dfc2_z, grads.at("fc2_w"),
                         grads.at("fc2_b"), dfc1_drop);

  Tensor dfc1_relu = dropout_backward(dfc1_drop, trace.fc1_mask);
  Tensor dfc1_z = relu_backward(trace.fc1_z, dfc1_relu);

  Tensor dflat({cfg.flat_dim()});
  fc_backward_accumulate(trace.flat, params.fc1_w, dfc1_z, grads.at("fc1_w"),
                         grads.at("fc1_b"), dflat);

  Tensor dpool({cfg.conv_channels, cfg.pool_out_h(), cfg.pool_out_w()});
  std::copy(dflat.data(), dflat.data() + dflat.size(), dpool.data());
  Tensor dlrn = maxpool_backward(dpool, trace.pooled.argmax, trace.lrn_out.dims());
  Tensor dconv_relu = lrn_backward(trace.conv_relu, dlrn, cfg.lrn);
  Tensor dconv_out = relu_backward(trace.conv_out, dconv_relu);

  const Conv2dSpec conv_spec{cfg.freq_pad, 0, 1, 1};
  LayerGrad conv_grad = conv2d_backward(trace.centered, params.conv_w, dconv_out, conv_spec);
  Tensor& dconv_w = grads.at("conv_w");
  const Tensor& gf = conv_grad.param_grads.at("filters");
  for (std::size_t i = 0; i < dconv_w.size(); ++i) dconv_w[i] += gf[i];
  Tensor& dconv_b = grads.at("conv_b");
  const Tensor& gb = conv_grad.param_grads.at("bias");
  for (std::size_t i = 0; i < dconv_b.size(); ++i) dconv_b[i] += gb[i];
}

namespace {

struct Accuracy {
  double top1 = 0.0;
  double top5 = 0.0;
};

Accuracy evaluate_accuracy(const std::vector<LabeledSpectrogram>& data,
                           const WordCnnParams& params) {
  std::size_t hit1 = 0, hit5 = 0;
  const std::size_t v = params.cfg.vocab_size;
  const std::size_t top_n = std::min<std::size_t>(5, v);
  for (const auto& ex : data) {
    const Tensor logits = word_cnn_forward(ex.spec, params, Mode::eval).logits;
    // rank of the true label: count of strictly greater logits, earlier
    // indices win ties
    std::size_t better = 0;
    for (std::size_t i = 0; i < v; ++i) {
      if (logits[i] > logits[ex.label] || (logits[i] == logits[ex.label] && i < ex.label)) {
        ++better;
      }
    }
    if (better == 0) ++hit1;
    if (better < top_n) ++hit5;
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(hit1) / n, static_cast<double>(hit5) / n};
}

}  // namespace

PretrainResult pretrain(const std::vector<LabeledSpectrogram>& train,
                        const std::vector<LabeledSpectrogram>& val,
                        const WordCnnConfig& arch, const PretrainConfig& cfg) {
  arch.validate();
  if (train.empty()) throw ParamError("pretrain: empty training set");
  if (cfg.batch_size < 1) throw ParamError("pretrain: batch_size must be >= 1");
  for (const auto& ex : train) {
    if (ex.label >= arch.vocab_size) {
      throw ParamError("pretrain: label " + std::to_string(ex.label) +
                       " out of range for vocab size " + std::to_string(arch.vocab_size));
    }
  }
  for (const auto& ex : val) {
    if (ex.label >= arch.vocab_size) throw ParamError("pretrain: validation label out of range");
  }

  PretrainResult result;
  result.params = WordCnnParams::init(arch, cfg.seed);
  {
    std::vector<Tensor> specs;
    specs.reserve(train.size());
    for (const auto& ex : train) specs.push_back(ex.spec);
    result.params.mean_spectrogram = estimate_mean_spectrogram(specs);
  }

  Rng rng(cfg.seed + 1);
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  const ParamRefs refs = result.params.param_refs();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      auto grads = zero_like_grads(result.params);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train[order[i]];
        WordCnnTrace trace =
            word_cnn_forward_trace(ex.spec, result.params, Mode::train, &rng, ex.label, true);
        epoch_loss += trace.loss;
        word_cnn_backward_accumulate(trace, result.params, ex.label, grads);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, g] : grads) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= inv;
      }
      opt.step(refs, grads);
    }
    epoch_loss /= static_cast<double>(train.size());

    EpochStats stats;
    stats.train_loss = epoch_loss;
    stats.learning_rate = opt.learning_rate();
    const Accuracy train_acc = evaluate_accuracy(train, result.params);
    stats.train_top1 = train_acc.top1;
    stats.train_top5 = train_acc.top5;
    if (!val.empty()) {
      const Accuracy val_acc = evaluate_accuracy(val, result.params);
      stats.val_top1 = val_acc.top1;
      stats.val_top5 = val_acc.top5;
    }
    result.epochs.push_back(stats);

    if (cfg.target_train_top1 > 0.0 && stats.train_top1 >= cfg.target_train_top1) break;

    if (epoch_loss < best_loss * (1.0 - 1e-4)) {
      best_loss = epoch_loss;
      stale_epochs = 0;
    } else if (++stale_epochs >= cfg.plateau_patience) {
      opt.set_learning_rate(opt.learning_rate() * cfg.lr_decay);
      stale_epochs = 0;
    }
  }
  return result;
}

}  // namespace specembed
