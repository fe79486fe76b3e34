#include <doctest.h>

#include <cmath>

#include "specembed/errors.hpp"
#include "specembed/grad_check.hpp"
#include "specembed/layers.hpp"
#include "test_util.hpp"

using namespace specembed;
using specembed::testing::project;
using specembed::testing::random_tensor;
using specembed::testing::random_uniform_tensor;

namespace {

constexpr double kFdTol = 1e-5;
constexpr int kSeeds = 20;

// Smallest top-two gap across all pooling windows; FD perturbations must not
// flip an argmax.
double min_pool_gap(const Tensor& input, const PoolSpec& spec) {
  const std::size_t c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = (h - spec.pool_h) / spec.stride_h + 1;
  const std::size_t ow = (w - spec.pool_w) / spec.stride_w + 1;
  double gap = 1e9;
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t q = 0; q < ow; ++q) {
        double best = -1e18, second = -1e18;
        for (std::size_t pr = 0; pr < spec.pool_h; ++pr) {
          for (std::size_t pc = 0; pc < spec.pool_w; ++pc) {
            const double v = input(c, r * spec.stride_h + pr, q * spec.stride_w + pc);
            if (v > best) {
              second = best;
              best = v;
            } else if (v > second) {
              second = v;
            }
          }
        }
        if (spec.pool_h * spec.pool_w > 1) gap = std::min(gap, best - second);
      }
    }
  }
  return gap;
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("conv2d shape follows the floor formula for the word architecture") {
  Tensor input({1, 40, 100});
  Tensor filters({64, 1, 40, 5});
  Tensor bias({64});
  Tensor out = conv2d(input, filters, bias, {1, 0, 1, 1});
  CHECK(out.dims() == std::vector<std::size_t>{64, 3, 96});
}

TEST_CASE("conv2d zero input and zero bias give zero output") {
  Rng rng(7);
  Tensor input({2, 5, 6});
  Tensor filters = random_tensor({3, 2, 2, 2}, rng);
  Tensor bias({3});
  Tensor out = conv2d(input, filters, bias, {0, 0, 1, 1});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("conv2d with a 2x2 ones filter sums each window") {
  Rng rng(11);
  Tensor input = random_tensor({1, 3, 3}, rng);
  Tensor filters({1, 1, 2, 2}, {1, 1, 1, 1});
  Tensor bias({1});
  Tensor out = conv2d(input, filters, bias, {0, 0, 1, 1});
  REQUIRE(out.dims() == std::vector<std::size_t>{1, 2, 2});
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double expected = input(0, r, c) + input(0, r, c + 1) + input(0, r + 1, c) +
                              input(0, r + 1, c + 1);
      CHECK(out(0, r, c) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d rejects channel mismatch and oversized filters") {
  Tensor input({2, 4, 4});
  Tensor bias({1});
  CHECK_THROWS_AS(conv2d(input, Tensor({1, 3, 2, 2}), bias, {}), ShapeError);
  CHECK_THROWS_AS(conv2d(input, Tensor({1, 2, 5, 2}), bias, {}), ShapeError);
}

TEST_CASE("conv2d output dims satisfy the floor formulas over random configs") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c_in = 1 + rng.uniform_index(3);
    const std::size_t c_out = 1 + rng.uniform_index(3);
    const std::size_t h = 1 + rng.uniform_index(8), w = 1 + rng.uniform_index(8);
    Conv2dSpec spec{rng.uniform_index(3), rng.uniform_index(3), 1 + rng.uniform_index(3),
                    1 + rng.uniform_index(3)};
    const std::size_t fh = 1 + rng.uniform_index(h + 2 * spec.pad_h);
    const std::size_t fw = 1 + rng.uniform_index(w + 2 * spec.pad_w);
    Tensor out = conv2d(Tensor({c_in, h, w}), Tensor({c_out, c_in, fh, fw}),
                        Tensor({c_out}), spec);
    CHECK(out.dim(0) == c_out);
    CHECK(out.dim(1) == (h + 2 * spec.pad_h - fh) / spec.stride_h + 1);
    CHECK(out.dim(2) == (w + 2 * spec.pad_w - fw) / spec.stride_w + 1);
  }
}

TEST_CASE("conv2d_backward zero upstream gives zero gradients") {
  Rng rng(5);
  Tensor input = random_tensor({2, 4, 5}, rng);
  Tensor filters = random_tensor({3, 2, 2, 3}, rng);
  Conv2dSpec spec{1, 0, 1, 1};
  Tensor out = conv2d(input, filters, Tensor({3}), spec);
  LayerGrad g = conv2d_backward(input, filters, Tensor(out.dims()), spec);
  for (std::size_t i = 0; i < g.input_grad.size(); ++i) CHECK(g.input_grad[i] == 0.0);
  for (const auto& [name, t] : g.param_grads) {
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);
  }
}

TEST_CASE("conv2d bias gradient sums the upstream per channel") {
  Rng rng(6);
  Tensor input = random_tensor({1, 4, 4}, rng);
  Tensor filters = random_tensor({2, 1, 2, 2}, rng);
  Conv2dSpec spec{};
  Tensor upstream = random_tensor({2, 3, 3}, rng);
  LayerGrad g = conv2d_backward(input, filters, upstream, spec);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t q = 0; q < 3; ++q) sum += upstream(c, r, q);
    }
    CHECK(g.param_grads.at("bias")[c] == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("conv2d_backward matches finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(100 + seed);
    const std::size_t c_in = 1 + rng.uniform_index(2);
    const std::size_t c_out = 1 + rng.uniform_index(2);
    const std::size_t h = 3 + rng.uniform_index(3), w = 3 + rng.uniform_index(3);
    Conv2dSpec spec{rng.uniform_index(2), rng.uniform_index(2), 1 + rng.uniform_index(2),
                    1 + rng.uniform_index(2)};
    const std::size_t fh = 1 + rng.uniform_index(2), fw = 1 + rng.uniform_index(2);

    Tensor input = random_tensor({c_in, h, w}, rng);
    Tensor filters = random_tensor({c_out, c_in, fh, fw}, rng);
    Tensor bias = random_tensor({c_out}, rng);
    Tensor out = conv2d(input, filters, bias, spec);
    Tensor direction = random_tensor(out.dims(), rng);

    LayerGrad analytic = conv2d_backward(input, filters, direction, spec);

    auto f_input = [&](const Tensor& x) { return project(conv2d(x, filters, bias, spec), direction); };
    CHECK(grad_check(f_input, input, analytic.input_grad) < kFdTol);

    auto f_filters = [&](const Tensor& f) { return project(conv2d(input, f, bias, spec), direction); };
    CHECK(grad_check(f_filters, filters, analytic.param_grads.at("filters")) < kFdTol);

    auto f_bias = [&](const Tensor& b) { return project(conv2d(input, filters, b, spec), direction); };
    CHECK(grad_check(f_bias, bias, analytic.param_grads.at("bias")) < kFdTol);
  }
}

TEST_CASE("relu clamps negatives and keeps nonnegative input unchanged") {
  Tensor t = Tensor::vector({-1.0, 0.0, 2.0});
  Tensor out = relu(t);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 2.0);

  Tensor nonneg = Tensor::vector({0.0, 0.5, 3.0});
  CHECK(relu(nonneg) == nonneg);
}

TEST_CASE("relu_backward matches finite differences away from zero") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(200 + seed);
    Tensor input = random_tensor({3, 4}, rng);
    std::vector<bool> include(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) include[i] = std::abs(input[i]) > 1e-4;
    Tensor direction = random_tensor(input.dims(), rng);
    Tensor analytic = relu_backward(input, direction);
    auto f = [&](const Tensor& x) { return project(relu(x), direction); };
    CHECK(grad_check(f, input, analytic, 1e-5, &include) < kFdTol);
  }
}

TEST_CASE("lrn zero maps to zero and the scalar case matches the formula") {
  Tensor zero({3, 2, 2});
  Tensor out = lrn(zero, {5, 1e-4, 0.75, 1.0});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);

  Tensor one({1, 1, 1}, {1.0});
  Tensor b = lrn(one, {5, 1e-4, 0.75, 1.0});
  const double expected = 1.0 / std::pow(1.0 + (1e-4 / 5.0), 0.75);
  CHECK(b[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("lrn preserves sign elementwise") {
  Rng rng(17);
  Tensor input = random_tensor({6, 3, 2}, rng, 2.0);
  Tensor out = lrn(input, {5, 1e-4, 0.75, 1.0});
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input[i] > 0) CHECK(out[i] > 0);
    if (input[i] < 0) CHECK(out[i] < 0);
    if (input[i] == 0) CHECK(out[i] == 0);
  }
}

TEST_CASE("lrn rejects even widths; oversized windows clip to all channels") {
  Tensor input({2, 2, 2});
  CHECK_THROWS_AS(lrn(input, {4, 1e-4, 0.75, 1.0}), ParamError);
  // width 5 over 2 channels clips to the full channel range everywhere, so
  // only the alpha/n coefficient distinguishes it from width 3
  Rng rng(19);
  Tensor x = random_tensor({2, 2, 2}, rng);
  Tensor wide = lrn(x, {5, 1e-4, 0.75, 1.0});
  Tensor narrow = lrn(x, {3, 3.0 * 1e-4 / 5.0, 0.75, 1.0});
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(wide[i] == doctest::Approx(narrow[i]).epsilon(1e-14));
  }
}

TEST_CASE("lrn_backward matches finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(300 + seed);
    Tensor input = random_tensor({5, 2, 3}, rng);
    Tensor direction = random_tensor(input.dims(), rng);
    LrnSpec spec{3, 1e-2, 0.75, 1.0};
    Tensor analytic = lrn_backward(input, direction, spec);
    auto f = [&](const Tensor& x) { return project(lrn(x, spec), direction); };
    CHECK(grad_check(f, input, analytic) < kFdTol);
  }
}

TEST_CASE("maxpool shape for the word architecture") {
  Tensor input({64, 3, 96});
  MaxPoolResult res = maxpool(input, {3, 4, 1, 2});
  CHECK(res.output.dims() == std::vector<std::size_t>{64, 1, 47});
}

TEST_CASE("maxpool constant input breaks ties toward the first window element") {
  Tensor input({1, 3, 4});
  input.fill(2.5);
  PoolSpec spec{2, 2, 1, 2};
  MaxPoolResult res = maxpool(input, spec);
  for (std::size_t i = 0; i < res.output.size(); ++i) CHECK(res.output[i] == 2.5);
  // argmax of each window is its top-left corner
  CHECK(res.argmax[0] == 0);
  CHECK(res.argmax[1] == 2);
  CHECK(res.argmax[2] == 4);
  CHECK(res.argmax[3] == 6);

  Tensor upstream(res.output.dims());
  upstream.fill(1.0);
  Tensor back = maxpool_backward(upstream, res.argmax, input.dims());
  CHECK(back[0] == 1.0);
  CHECK(back[1] == 0.0);
}

TEST_CASE("maxpool rejects windows larger than the input") {
  CHECK_THROWS_AS(maxpool(Tensor({1, 2, 2}), {3, 1, 1, 1}), ShapeError);
}

TEST_CASE("maxpool output dims satisfy the floor formulas over random configs") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c = 1 + rng.uniform_index(3);
    const std::size_t h = 1 + rng.uniform_index(8), w = 1 + rng.uniform_index(8);
    PoolSpec spec{1 + rng.uniform_index(h), 1 + rng.uniform_index(w),
                  1 + rng.uniform_index(3), 1 + rng.uniform_index(3)};
    MaxPoolResult res = maxpool(Tensor({c, h, w}), spec);
    CHECK(res.output.dim(1) == (h - spec.pool_h) / spec.stride_h + 1);
    CHECK(res.output.dim(2) == (w - spec.pool_w) / spec.stride_w + 1);
  }
}

TEST_CASE("maxpool_backward matches finite differences with ties screened") {
  int checked = 0;
  for (int seed = 0; checked < kSeeds && seed < kSeeds * 10; ++seed) {
    Rng rng(400 + seed);
    Tensor input = random_tensor({2, 4, 5}, rng);
    PoolSpec spec{2, 2, 1, 2};
    if (min_pool_gap(input, spec) < 1e-3) continue;
    ++checked;
    MaxPoolResult res = maxpool(input, spec);
    Tensor direction = random_tensor(res.output.dims(), rng);
    Tensor analytic = maxpool_backward(direction, res.argmax, input.dims());
    auto f = [&](const Tensor& x) { return project(maxpool(x, spec).output, direction); };
    CHECK(grad_check(f, input, analytic) < kFdTol);
  }
  CHECK(checked == kSeeds);
}

TEST_CASE("fully_connected identity weight and zero input cases") {
  Tensor identity({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor x = Tensor::vector({1.5, -2.0, 3.0});
  CHECK(fully_connected(x, identity, Tensor({3})) == x);

  Rng rng(31);
  Tensor w = random_tensor({4, 3}, rng);
  Tensor b = random_tensor({4}, rng);
  CHECK(fully_connected(Tensor({3}), w, b) == b);

  CHECK_THROWS_AS(fully_connected(Tensor({2}), w, b), ShapeError);
}

TEST_CASE("fc_backward matches finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(500 + seed);
    const std::size_t k = 1 + rng.uniform_index(5), d = 1 + rng.uniform_index(5);
    Tensor x = random_tensor({d}, rng);
    Tensor w = random_tensor({k, d}, rng);
    Tensor b = random_tensor({k}, rng);
    Tensor direction = random_tensor({k}, rng);
    LayerGrad analytic = fc_backward(x, w, direction);

    auto f_x = [&](const Tensor& t) { return project(fully_connected(t, w, b), direction); };
    CHECK(grad_check(f_x, x, analytic.input_grad) < kFdTol);
    auto f_w = [&](const Tensor& t) { return project(fully_connected(x, t, b), direction); };
    CHECK(grad_check(f_w, w, analytic.param_grads.at("weight")) < kFdTol);
    auto f_b = [&](const Tensor& t) { return project(fully_connected(x, w, t), direction); };
    CHECK(grad_check(f_b, b, analytic.param_grads.at("bias")) < kFdTol);
  }
}

TEST_CASE("dropout rate zero and eval mode are the identity") {
  Rng rng(41);
  Tensor x = random_tensor({100}, rng);
  CHECK(dropout(x, 0.0, Mode::train, 9).output == x);
  CHECK(dropout(x, 0.7, Mode::eval, 9).output == x);
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, 9), ParamError);
  CHECK_THROWS_AS(dropout(x, -0.1, Mode::train, 9), ParamError);
}

TEST_CASE("dropout train mode is seed-reproducible with the expected survivor rate") {
  Tensor x({100000});
  x.fill(1.0);
  const double rate = 0.3;
  DropoutResult a = dropout(x, rate, Mode::train, 1234);
  DropoutResult b = dropout(x, rate, Mode::train, 1234);
  CHECK(a.output == b.output);
  CHECK(a.mask == b.mask);

  std::size_t survivors = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (a.mask[i] != 0.0) {
      ++survivors;
      CHECK(a.output[i] == doctest::Approx(1.0 / (1.0 - rate)).epsilon(1e-12));
    }
  }
  const double fraction = static_cast<double>(survivors) / static_cast<double>(x.size());
  CHECK(std::abs(fraction - (1.0 - rate)) < 0.01);
}

TEST_CASE("softmax_xent uniform logits and stabilized extreme logits") {
  Tensor logits({4});
  SoftmaxXentResult res = softmax_xent(logits, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(res.probs[i] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Tensor extreme = Tensor::vector({1000.0, 0.0});
  SoftmaxXentResult big = softmax_xent(extreme, 0);
  CHECK(std::isfinite(big.loss));
  CHECK(big.loss == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(softmax_xent(logits, 4), ParamError);
}

TEST_CASE("softmax probs are nonnegative and sum to one within 1e-12") {
  Rng rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(20);
    Tensor logits = random_tensor({k}, rng, trial % 3 == 0 ? 200.0 : 3.0);
    SoftmaxXentResult res = softmax_xent(logits, rng.uniform_index(k));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(res.probs[i] >= 0.0);
      sum += res.probs[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax_xent gradient matches finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(600 + seed);
    const std::size_t k = 2 + rng.uniform_index(6);
    Tensor logits = random_tensor({k}, rng, 2.0);
    const std::size_t label = rng.uniform_index(k);
    SoftmaxXentResult res = softmax_xent(logits, label);
    Tensor analytic = softmax_xent_backward(res.probs, label);
    auto f = [&](const Tensor& x) { return softmax_xent(x, label).loss; };
    CHECK(grad_check(f, logits, analytic) < kFdTol);
  }
}

TEST_CASE("dropout_backward routes gradient through the frozen mask") {
  Rng rng(53);
  Tensor x = random_tensor({40}, rng);
  DropoutResult d = dropout(x, 0.5, Mode::train, 77);
  Tensor direction = random_tensor(x.dims(), rng);
  Tensor analytic = dropout_backward(direction, d.mask);
  auto f = [&](const Tensor& t) {
    Tensor out(t.dims());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] * d.mask[i];
    return project(out, direction);
  };
  // linear, so exact up to central-difference rounding
  CHECK(grad_check(f, x, analytic) < 1e-8);
}

}  // TEST_SUITE
