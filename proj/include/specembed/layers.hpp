#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specembed/rng.hpp"
#include "specembed/tensor.hpp"

namespace specembed {

enum class Mode { train, eval };

// Gradients produced by a layer's backward pass: the gradient w.r.t. the
// forward input plus one gradient per named parameter, dims matching.
struct LayerGrad {
  Tensor input_grad;
  std::map<std::string, Tensor> param_grads;
};

struct Conv2dSpec {
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
};

// Cross-correlation (no kernel flip) of input [C_in x H x W] with filters
// [C_out x C_in x FH x FW] plus per-channel bias. Zero padding of pad_h rows
// on top and bottom and pad_w columns on both sides. Output extents follow
// floor((H + 2*pad_h - FH) / stride_h) + 1 and the analogous width formula.
Tensor conv2d(const Tensor& input, const Tensor& filters, const Tensor& bias,
              const Conv2dSpec& spec);

// param_grads keys: "filters", "bias".
LayerGrad conv2d_backward(const Tensor& input, const Tensor& filters,
                          const Tensor& upstream, const Conv2dSpec& spec);

Tensor relu(const Tensor& input);

// Passes upstream where the forward input was > 0; subgradient 0 at 0.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

struct LrnSpec {
  std::size_t width = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 1.0;
};

// Across-channel local response normalization over [C x H x W]:
//   b_c = a_c / (k + (alpha/n) * sum_{c' in window(c)} a_{c'}^2)^beta
// with the width-n window centered on c and clipped at channel boundaries.
Tensor lrn(const Tensor& input, const LrnSpec& spec);

Tensor lrn_backward(const Tensor& input, const Tensor& upstream, const LrnSpec& spec);

struct PoolSpec {
  std::size_t pool_h = 1;
  std::size_t pool_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
};

struct MaxPoolResult {
  Tensor output;
  // Linear index into the input tensor of each output cell's max; ties break
  // toward the lowest linear index.
  std::vector<std::size_t> argmax;
};

// No padding; output extents follow floor((H - pool_h) / stride_h) + 1.
MaxPoolResult maxpool(const Tensor& input, const PoolSpec& spec);

Tensor maxpool_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax,
                        const std::vector<std::size_t>& input_dims);

// w x + b for input [D], weight [K x D], bias [K].
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

// param_grads keys: "weight", "bias".
LayerGrad fc_backward(const Tensor& input, const Tensor& weight, const Tensor& upstream);

struct DropoutResult {
  Tensor output;
  // Per-element multiplier: 0 for dropped elements, 1/(1-rate) for survivors
  // in train mode, 1 everywhere in eval mode. Backward is upstream * mask.
  Tensor mask;
};

// Inverted dropout: train mode zeroes each element with probability rate and
// scales survivors by 1/(1-rate); eval mode is the identity. Deterministic
// given the seed.
DropoutResult dropout(const Tensor& input, double rate, Mode mode, std::uint64_t seed);
DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng);

Tensor dropout_backward(const Tensor& upstream, const Tensor& mask);

struct SoftmaxXentResult {
  double loss = 0.0;
  Tensor probs;
};

// Numerically stabilized softmax cross-entropy against a single label.
SoftmaxXentResult softmax_xent(const Tensor& logits, std::size_t label);

// Gradient of the loss w.r.t. the logits: probs - onehot(label).
Tensor softmax_xent_backward(const Tensor& probs, std::size_t label);

}  // namespace specembed
