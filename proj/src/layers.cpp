#include "specembed/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "specembed/errors.hpp"

namespace specembed {

namespace {

std::size_t conv_extent(std::size_t in, std::size_t pad, std::size_t filter,
                        std::size_t stride) {
  return (in + 2 * pad - filter) / stride + 1;
}

void check_conv_args(const Tensor& input, const Tensor& filters, const Conv2dSpec& spec) {
  require_rank(input, 3, "conv2d input");
  require_rank(filters, 4, "conv2d filters");
  if (spec.stride_h < 1 || spec.stride_w < 1) {
    throw ParamError("conv2d strides must be >= 1");
  }
  if (filters.dim(1) != input.dim(0)) {
    throw ShapeError("conv2d: filter channel count " + std::to_string(filters.dim(1)) +
                     " does not match input channels " + std::to_string(input.dim(0)));
  }
  if (filters.dim(2) > input.dim(1) + 2 * spec.pad_h ||
      filters.dim(3) > input.dim(2) + 2 * spec.pad_w) {
    throw ShapeError("conv2d: filter " + dims_to_string(filters.dims()) +
                     " exceeds padded input " + dims_to_string(input.dims()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& filters, const Tensor& bias,
              const Conv2dSpec& spec) {
  check_conv_args(input, filters, spec);
  require_dims(bias, {filters.dim(0)}, "conv2d bias");

  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = filters.dim(0), fh = filters.dim(2), fw = filters.dim(3);
  const std::size_t oh = conv_extent(h, spec.pad_h, fh, spec.stride_h);
  const std::size_t ow = conv_extent(w, spec.pad_w, fw, spec.stride_w);

  Tensor out({c_out, oh, ow});
  for (std::size_t co = 0; co < c_out; ++co) {
    double* out_ch = out.data() + co * oh * ow;
    const double b = bias[co];
    for (std::size_t i = 0; i < oh * ow; ++i) out_ch[i] = b;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in_ch = input.data() + ci * h * w;
      for (std::size_t f_r = 0; f_r < fh; ++f_r) {
        for (std::size_t f_c = 0; f_c < fw; ++f_c) {
          const double kv = filters(co, ci, f_r, f_c);
          if (kv == 0.0) continue;
          for (std::size_t out_r = 0; out_r < oh; ++out_r) {
            const std::ptrdiff_t ir =
                static_cast<std::ptrdiff_t>(out_r * spec.stride_h + f_r) -
                static_cast<std::ptrdiff_t>(spec.pad_h);
            if (ir < 0 || ir >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* in_row = in_ch + static_cast<std::size_t>(ir) * w;
            double* out_row = out_ch + out_r * ow;
            for (std::size_t out_c = 0; out_c < ow; ++out_c) {
              const std::ptrdiff_t icol =
                  static_cast<std::ptrdiff_t>(out_c * spec.stride_w + f_c) -
                  static_cast<std::ptrdiff_t>(spec.pad_w);
              if (icol < 0 || icol >= static_cast<std::ptrdiff_t>(w)) continue;
              out_row[out_c] += kv * in_row[static_cast<std::size_t>(icol)];
            }
          }
        }
      }
    }
  }
  return out;
}

LayerGrad conv2d_backward(const Tensor& input, const Tensor& filters,
                          const Tensor& upstream, const Conv2dSpec& spec) {
  check_conv_args(input, filters, spec);
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = filters.dim(0), fh = filters.dim(2), fw = filters.dim(3);
  const std::size_t oh = conv_extent(h, spec.pad_h, fh, spec.stride_h);
  const std::size_t ow = conv_extent(w, spec.pad_w, fw, spec.stride_w);
  require_dims(upstream, {c_out, oh, ow}, "conv2d upstream gradient");

  LayerGrad grad;
  grad.input_grad = Tensor(input.dims());
  Tensor dfilters(filters.dims());
  Tensor dbias({c_out});

  for (std::size_t co = 0; co < c_out; ++co) {
    const double* g_ch = upstream.data() + co * oh * ow;
    double acc = 0.0;
    for (std::size_t i = 0; i < oh * ow; ++i) acc += g_ch[i];
    dbias[co] = acc;

    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in_ch = input.data() + ci * h * w;
      double* din_ch = grad.input_grad.data() + ci * h * w;
      for (std::size_t f_r = 0; f_r < fh; ++f_r) {
        for (std::size_t f_c = 0; f_c < fw; ++f_c) {
          const double kv = filters(co, ci, f_r, f_c);
          double dk = 0.0;
          for (std::size_t out_r = 0; out_r < oh; ++out_r) {
            const std::ptrdiff_t ir =
                static_cast<std::ptrdiff_t>(out_r * spec.stride_h + f_r) -
                static_cast<std::ptrdiff_t>(spec.pad_h);
            if (ir < 0 || ir >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* in_row = in_ch + static_cast<std::size_t>(ir) * w;
            double* din_row = din_ch + static_cast<std::size_t>(ir) * w;
            const double* g_row = g_ch + out_r * ow;
            for (std::size_t out_c = 0; out_c < ow; ++out_c) {
              const std::ptrdiff_t icol =
                  static_cast<std::ptrdiff_t>(out_c * spec.stride_w + f_c) -
                  static_cast<std::ptrdiff_t>(spec.pad_w);
              if (icol < 0 || icol >= static_cast<std::ptrdiff_t>(w)) continue;
              const double g = g_row[out_c];
              dk += g * in_row[static_cast<std::size_t>(icol)];
              din_row[static_cast<std::size_t>(icol)] += g * kv;
            }
          }
          dfilters(co, ci, f_r, f_c) = dk;
        }
      }
    }
  }
  grad.param_grads["filters"] = std::move(dfilters);
  grad.param_grads["bias"] = std::move(dbias);
  return grad;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  if (!input.same_dims(upstream)) {
    throw ShapeError("relu_backward: upstream dims " + dims_to_string(upstream.dims()) +
                     " do not match input dims " + dims_to_string(input.dims()));
  }
  Tensor out(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? upstream[i] : 0.0;
  return out;
}

namespace {

// The window clips at channel boundaries, so its effective extent never
// exceeds 2C-1; widths beyond that just behave as all-channel windows.
void check_lrn_args(const Tensor& input, const LrnSpec& spec) {
  require_rank(input, 3, "lrn input");
  if (spec.width % 2 == 0) throw ParamError("lrn width must be odd");
}

}  // namespace

Tensor lrn(const Tensor& input, const LrnSpec& spec) {
  check_lrn_args(input, spec);
  const std::size_t c_n = input.dim(0), hw = input.dim(1) * input.dim(2);
  const std::size_t half = (spec.width - 1) / 2;
  const double coef = spec.alpha / static_cast<double>(spec.width);

  Tensor out(input.dims());
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const std::size_t lo = c >= half ? c - half : 0;
      const std::size_t hi = std::min(c + half, c_n - 1);
      double sumsq = 0.0;
      for (std::size_t cc = lo; cc <= hi; ++cc) {
        const double a = input[cc * hw + p];
        sumsq += a * a;
      }
      const double scale = spec.k + coef * sumsq;
      out[c * hw + p] = input[c * hw + p] * std::pow(scale, -spec.beta);
    }
  }
  return out;
}

Tensor lrn_backward(const Tensor& input, const Tensor& upstream, const LrnSpec& spec) {
  check_lrn_args(input, spec);
  if (!input.same_dims(upstream)) {
    throw ShapeError("lrn_backward: upstream dims do not match input dims");
  }
  const std::size_t c_n = input.dim(0), hw = input.dim(1) * input.dim(2);
  const std::size_t half = (spec.width - 1) / 2;
  const double coef = spec.alpha / static_cast<double>(spec.width);

  Tensor out(input.dims());
  std::vector<double> scale(c_n), pow_m_beta(c_n);
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const std::size_t lo = c >= half ? c - half : 0;
      const std::size_t hi = std::min(c + half, c_n - 1);
      double sumsq = 0.0;
      for (std::size_t cc = lo; cc <= hi; ++cc) {
        const double a = input[cc * hw + p];
        sumsq += a * a;
      }
      scale[c] = spec.k + coef * sumsq;
      pow_m_beta[c] = std::pow(scale[c], -spec.beta);
    }
    // d b_c / d a_e = delta_ce * scale_c^-beta
    //                 - 2 beta coef * a_c * a_e * scale_c^(-beta-1)  for e in window(c);
    // window membership is symmetric, so sum over c in window(e).
    for (std::size_t e = 0; e < c_n; ++e) {
      const std::size_t lo = e >= half ? e - half : 0;
      const std::size_t hi = std::min(e + half, c_n - 1);
      double cross = 0.0;
      for (std::size_t c = lo; c <= hi; ++c) {
        cross += upstream[c * hw + p] * input[c * hw + p] * pow_m_beta[c] / scale[c];
      }
      out[e * hw + p] = upstream[e * hw + p] * pow_m_beta[e] -
                        2.0 * spec.beta * coef * input[e * hw + p] * cross;
    }
  }
  return out;
}

MaxPoolResult maxpool(const Tensor& input, const PoolSpec& spec) {
  require_rank(input, 3, "maxpool input");
  if (spec.stride_h < 1 || spec.stride_w < 1) throw ParamError("maxpool strides must be >= 1");
  const std::size_t c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (spec.pool_h > h || spec.pool_w > w) {
    throw ShapeError("maxpool: window " + std::to_string(spec.pool_h) + "x" +
                     std::to_string(spec.pool_w) + " exceeds input " +
                     dims_to_string(input.dims()));
  }
  const std::size_t oh = (h - spec.pool_h) / spec.stride_h + 1;
  const std::size_t ow = (w - spec.pool_w) / spec.stride_w + 1;

  MaxPoolResult res;
  res.output = Tensor({c_n, oh, ow});
  res.argmax.assign(c_n * oh * ow, 0);
  for (std::size_t c = 0; c < c_n; ++c) {
    const double* in_ch = input.data() + c * h * w;
    for (std::size_t out_r = 0; out_r < oh; ++out_r) {
      for (std::size_t out_c = 0; out_c < ow; ++out_c) {
        const std::size_t r0 = out_r * spec.stride_h, c0 = out_c * spec.stride_w;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t pr = 0; pr < spec.pool_h; ++pr) {
          for (std::size_t pc = 0; pc < spec.pool_w; ++pc) {
            const std::size_t idx = (r0 + pr) * w + (c0 + pc);
            if (in_ch[idx] > best) {
              best = in_ch[idx];
              best_idx = idx;
            }
          }
        }
        res.output(c, out_r, out_c) = best;
        res.argmax[(c * oh + out_r) * ow + out_c] = c * h * w + best_idx;
      }
    }
  }
  return res;
}

Tensor maxpool_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax,
                        const std::vector<std::size_t>& input_dims) {
  if (upstream.size() != argmax.size()) {
    throw ShapeError("maxpool_backward: upstream size does not match argmax count");
  }
  Tensor out(input_dims);
  for (std::size_t i = 0; i < argmax.size(); ++i) out[argmax[i]] += upstream[i];
  return out;
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "fully_connected weight");
  const std::size_t k = weight.dim(0), d = weight.dim(1);
  if (input.size() != d) {
    throw ShapeError("fully_connected: input size " + std::to_string(input.size()) +
                     " does not match weight inner dim " + std::to_string(d));
  }
  require_dims(bias, {k}, "fully_connected bias");

  Tensor out({k});
  const double* x = input.data();
  for (std::size_t r = 0; r < k; ++r) {
    const double* w_row = weight.data() + r * d;
    double acc = bias[r];
    for (std::size_t j = 0; j < d; ++j) acc += w_row[j] * x[j];
    out[r] = acc;
  }
  return out;
}

LayerGrad fc_backward(const Tensor& input, const Tensor& weight, const Tensor& upstream) {
  require_rank(weight, 2, "fc_backward weight");
  const std::size_t k = weight.dim(0), d = weight.dim(1);
  if (input.size() != d) throw ShapeError("fc_backward: input size does not match weight");
  if (upstream.size() != k) throw ShapeError("fc_backward: upstream size does not match weight");

  LayerGrad grad;
  grad.input_grad = Tensor(input.dims());
  Tensor dweight({k, d});
  Tensor dbias({k});
  double* dx = grad.input_grad.data();
  const double* x = input.data();
  for (std::size_t r = 0; r < k; ++r) {
    const double g = upstream[r];
    dbias[r] = g;
    const double* w_row = weight.data() + r * d;
    double* dw_row = dweight.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      dw_row[j] = g * x[j];
      dx[j] += g * w_row[j];
    }
  }
  grad.param_grads["weight"] = std::move(dweight);
  grad.param_grads["bias"] = std::move(dbias);
  return grad;
}

DropoutResult dropout(const Tensor& input, double rate, Mode mode, std::uint64_t seed) {
  Rng rng(seed);
  return dropout(input, rate, mode, rng);
}

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ParamError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult res;
  res.mask = Tensor(input.dims());
  res.output = Tensor(input.dims());
  if (mode == Mode::eval || rate == 0.0) {
    res.mask.fill(1.0);
    res.output = input;
    return res;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : keep_scale;
    res.mask[i] = m;
    res.output[i] = input[i] * m;
  }
  return res;
}

Tensor dropout_backward(const Tensor& upstream, const Tensor& mask) {
  if (!upstream.same_dims(mask)) throw ShapeError("dropout_backward: dims mismatch");
  Tensor out(upstream.dims());
  for (std::size_t i = 0; i < upstream.size(); ++i) out[i] = upstream[i] * mask[i];
  return out;
}

SoftmaxXentResult softmax_xent(const Tensor& logits, std::size_t label) {
  require_rank(logits, 1, "softmax_xent logits");
  const std::size_t k = logits.size();
  if (label >= k) {
    throw ParamError("softmax_xent label " + std::to_string(label) + " out of range for " +
                     std::to_string(k) + " classes");
  }
  double max_logit = logits[0];
  for (std::size_t i = 1; i < k; ++i) max_logit = std::max(max_logit, logits[i]);

  SoftmaxXentResult res;
  res.probs = Tensor({k});
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = std::exp(logits[i] - max_logit);
    res.probs[i] = e;
    sum += e;
  }
  for (std::size_t i = 0; i < k; ++i) res.probs[i] /= sum;
  res.loss = -(logits[label] - max_logit - std::log(sum));
  return res;
}

Tensor softmax_xent_backward(const Tensor& probs, std::size_t label) {
  require_rank(probs, 1, "softmax_xent_backward probs");
  if (label >= probs.size()) throw ParamError("softmax_xent_backward label out of range");
  Tensor out = probs;
  out[label] -= 1.0;
  return out;
}

}  // namespace specembed
