#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specembed/layers.hpp"
#include "specembed/optim.hpp"
#include "specembed/rng.hpp"
#include "specembed/tensor.hpp"

namespace specembed {

// Isolated-word spectrogram classifier. Layer stack:
//   mean subtraction
//   -> conv (full-height filters, freq padding top+bottom) -> ReLU -> LRN
//   -> max pool -> fc1 -> ReLU -> dropout -> fc2 -> ReLU -> dropout
//   -> softmax layer
// The word embedding is the post-ReLU fc2 activation with dropout disabled.
struct WordCnnConfig {
  std::size_t bands = 40;
  std::size_t frames = 100;
  std::size_t conv_channels = 64;
  std::size_t filter_time = 5;   // filter height is always `bands`
  std::size_t freq_pad = 1;
  LrnSpec lrn{};
  PoolSpec pool{3, 4, 1, 2};
  std::size_t fc_dim = 1024;
  double dropout_rate = 0.5;
  std::size_t vocab_size = 0;

  std::size_t conv_out_h() const { return 2 * freq_pad + 1; }
  std::size_t conv_out_w() const { return frames - filter_time + 1; }
  std::size_t pool_out_h() const { return (conv_out_h() - pool.pool_h) / pool.stride_h + 1; }
  std::size_t pool_out_w() const { return (conv_out_w() - pool.pool_w) / pool.stride_w + 1; }
  std::size_t flat_dim() const { return conv_channels * pool_out_h() * pool_out_w(); }

  void validate() const;
};

struct WordCnnParams {
  WordCnnConfig cfg;
  Tensor mean_spectrogram;  // bands x frames
  Tensor conv_w, conv_b;
  Tensor fc1_w, fc1_b;
  Tensor fc2_w, fc2_b;
  Tensor out_w, out_b;

  // Gaussian init with sigma = 1/sqrt(fan_in), zero biases, zero mean grid.
  static WordCnnParams init(const WordCnnConfig& cfg, std::uint64_t seed);

  ParamRefs param_refs();
};

// Cellwise mean over a nonempty set of equally sized spectrograms.
Tensor estimate_mean_spectrogram(const std::vector<Tensor>& specs);

struct WordCnnOutput {
  Tensor logits;
  Tensor embedding;  // post-ReLU fc2, nonnegative
};

WordCnnOutput word_cnn_forward(const Tensor& spec, const WordCnnParams& params, Mode mode,
                               std::uint64_t seed = 0);

Tensor embed_word(const Tensor& spec, const WordCnnParams& params);

// Forward with every intermediate kept, for the training backward pass.
struct WordCnnTrace {
  Tensor centered;  // input minus mean, 1 x bands x frames
  Tensor conv_out, conv_relu, lrn_out;
  MaxPoolResult pooled;
  Tensor flat;
  Tensor fc1_z, fc1_relu, fc1_drop, fc1_mask;
  Tensor fc2_z, fc2_relu, fc2_drop, fc2_mask;
  Tensor logits;
  Tensor probs;
  double loss = 0.0;
};

WordCnnTrace word_cnn_forward_trace(const Tensor& spec, const WordCnnParams& params,
                                    Mode mode, Rng* dropout_rng, std::size_t label,
                                    bool with_loss);

// Accumulates parameter gradients for one example (+=) into `grads`, which
// must hold zero or previously accumulated tensors of matching dims.
void word_cnn_backward_accumulate(const WordCnnTrace& trace, const WordCnnParams& params,
                                  std::size_t label, std::map<std::string, Tensor>& grads);

std::map<std::string, Tensor> zero_like_grads(WordCnnParams& params);

struct LabeledSpectrogram {
  Tensor spec;
  std::size_t label = 0;
};

struct PretrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double lr_decay = 0.1;             // applied when train loss plateaus
  std::size_t plateau_patience = 5;  // epochs without improvement
  double target_train_top1 = 0.0;    // > 0 stops training once reached
};

struct EpochStats {
  double train_loss = 0.0;
  double train_top1 = 0.0;
  double train_top5 = 0.0;
  std::optional<double> val_top1;
  std::optional<double> val_top5;
  double learning_rate = 0.0;
};

struct PretrainResult {
  WordCnnParams params;
  std::vector<EpochStats> epochs;
};

// Minibatch SGD with momentum on the mean cross-entropy. The mean
// spectrogram is estimated from the training set before the first epoch.
// Deterministic given cfg.seed. `val` may be empty.
PretrainResult pretrain(const std::vector<LabeledSpectrogram>& train,
                        const std::vector<LabeledSpectrogram>& val,
                        const WordCnnConfig& arch, const PretrainConfig& cfg);

}  // namespace specembed
