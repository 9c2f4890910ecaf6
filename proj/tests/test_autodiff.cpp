#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"
#include "xaikit/autodiff.hpp"
#include "xaikit/gradcheck.hpp"
#include "xaikit/kernels.hpp"
#include "xaikit/loss.hpp"

using namespace xaikit;
using testutil::random_tensor;

TEST_CASE("conv2d of an all-ones window sums the window") {
  const Tensor input = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor kernel = Tensor::full({1, 1, 2, 2}, 1.0);
  const Tensor bias({1});
  const Tensor out = kernels::conv2d_forward(input, kernel, bias, 1);
  CHECK(out.shape() == Shape{1, 1, 2, 2});
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(4.0));
}

TEST_CASE("conv2d with a zero kernel is the bias") {
  const Tensor input = random_tensor({2, 3, 5, 5}, 7);
  const Tensor kernel({4, 3, 2, 2});
  const Tensor bias = Tensor::of({4}, {0.5, -1.0, 2.0, 0.0});
  const Tensor out = kernels::conv2d_forward(input, kernel, bias, 1);
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t y = 0; y < out.dim(2); ++y)
      for (std::size_t x = 0; x < out.dim(3); ++x) CHECK(out(std::size_t{0}, f, y, x) == bias[f]);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Tensor input({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) input[i] = static_cast<double>(i + 1);
  Tensor kernel({1, 1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) kernel[i] = static_cast<double>(i + 1);
  const Tensor bias({1});

  const Tensor expected = oracle::naive_conv2d(input, kernel, bias, 1);
  const Tensor got = kernels::conv2d_forward(input, kernel, bias, 1);
  CHECK(got.shape() == Shape{1, 1, 2, 2});
  CHECK(testutil::max_abs_diff(got, expected) < 1e-12);

  // randomized shapes, strides 1 and 2
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor in = random_tensor({2, 3, 7, 6}, 100 + seed);
    const Tensor k = random_tensor({4, 3, 3, 3}, 200 + seed);
    const Tensor b = random_tensor({4}, 300 + seed);
    for (std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
      CHECK(testutil::max_abs_diff(kernels::conv2d_forward(in, k, b, stride), oracle::naive_conv2d(in, k, b, stride)) <
            1e-12);
    }
  }
}

TEST_CASE("conv2d rejects channel mismatches") {
  const Tensor input({1, 3, 4, 4});
  const Tensor kernel({2, 2, 2, 2});
  CHECK_THROWS_AS(kernels::conv2d_forward(input, kernel, Tensor({2}), 1), DimensionError);
}

TEST_CASE("conv2d is linear in the input for fixed kernels") {
  const Tensor kernel = random_tensor({2, 2, 3, 3}, 11);
  const Tensor bias({2});  // zero bias: conv is linear only without it
  const Tensor x = random_tensor({1, 2, 6, 6}, 12);
  const Tensor y = random_tensor({1, 2, 6, 6}, 13);
  const double a = 1.7, b = -0.4;

  Tensor mix({1, 2, 6, 6});
  for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = a * x[i] + b * y[i];
  const Tensor lhs = kernels::conv2d_forward(mix, kernel, bias, 1);
  const Tensor cx = kernels::conv2d_forward(x, kernel, bias, 1);
  const Tensor cy = kernels::conv2d_forward(y, kernel, bias, 1);
  for (std::size_t i = 0; i < lhs.numel(); ++i) CHECK(lhs[i] == doctest::Approx(a * cx[i] + b * cy[i]).epsilon(1e-10));
}

TEST_CASE("maxpool2 takes window maxima") {
  const Tensor input = Tensor::of({1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor out = kernels::maxpool2_forward(input);
  CHECK(out.numel() == 1);
  CHECK(out[0] == 4.0);

  const Tensor constant = Tensor::full({1, 2, 4, 4}, 3.25);
  const Tensor cout = kernels::maxpool2_forward(constant);
  for (std::size_t i = 0; i < cout.numel(); ++i) CHECK(cout[i] == 3.25);
}

TEST_CASE("maxpool2 drops odd trailing rows and columns") {
  const Tensor input = random_tensor({1, 1, 5, 7}, 3);
  const Tensor out = kernels::maxpool2_forward(input);
  CHECK(out.shape() == Shape{1, 1, 2, 3});
}

TEST_CASE("maxpool2 routes gradient to the argmax only") {
  Graph g;
  const Var x = g.leaf(Tensor::of({1, 1, 2, 2}, {1, 2, 3, 4}));
  const Var loss = g.sum(g.maxpool2(x));
  g.backward(loss);
  const Tensor& grad = g.grad(x);
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 0.0);
  CHECK(grad[2] == 0.0);
  CHECK(grad[3] == 1.0);
}

TEST_CASE("maxpool2 ties resolve to the first element in row-major order") {
  Graph g;
  const Var x = g.leaf(Tensor::full({1, 1, 2, 2}, 5.0));
  g.backward(g.sum(g.maxpool2(x)));
  const Tensor& grad = g.grad(x);
  CHECK(grad[0] == 1.0);
  CHECK(grad[1] + grad[2] + grad[3] == 0.0);
}

TEST_CASE("maxpool2 backward conserves gradient mass") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Graph g;
    const Var x = g.leaf(random_tensor({2, 3, 6, 8}, 400 + seed));
    const Var pooled = g.maxpool2(x);
    // loss = sum of pooled scaled elementwise by random weights
    const Tensor w = random_tensor(g.value(pooled).shape(), 500 + seed);
    const Var loss = g.sum(g.mul_const(pooled, w));
    g.backward(loss);
    CHECK(g.grad(x).sum() == doctest::Approx(w.sum()).epsilon(1e-12));
  }
}

TEST_CASE("dense identity and bias examples") {
  const Tensor identity = Tensor::of({2, 2}, {1, 0, 0, 1});
  const Tensor x = Tensor::of({1, 2}, {1, 2});
  const Tensor zero_bias({2});
  const Tensor same = kernels::dense_forward(x, identity, zero_bias);
  CHECK(testutil::bitwise_equal(same, x));

  const Tensor bias = Tensor::of({2}, {3, 4});
  const Tensor out = kernels::dense_forward(x, identity, bias);
  CHECK(out(0, 0) == 4.0);
  CHECK(out(0, 1) == 6.0);
}

TEST_CASE("dense matches the triple-loop oracle") {
  const Tensor in = random_tensor({2, 3}, 21);
  const Tensor w = random_tensor({3, 2}, 22);
  const Tensor b = random_tensor({2}, 23);
  CHECK(testutil::max_abs_diff(kernels::dense_forward(in, w, b), oracle::naive_dense(in, w, b)) < 1e-12);
}

TEST_CASE("dense rejects dimension mismatches") {
  CHECK_THROWS_AS(kernels::dense_forward(Tensor({1, 3}), Tensor({2, 4}), Tensor({4})), DimensionError);
}

TEST_CASE("relu, softmax and dropout basics") {
  const Tensor r = kernels::relu_forward(Tensor::of({3}, {-1, 0, 2}));
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  const Tensor s = kernels::softmax_rows(Tensor::of({1, 2}, {0, 0}));
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(0.5));

  Graph g;
  const Tensor x = random_tensor({4, 5}, 31);
  const Var inference = g.dropout(g.leaf(x), 0.25, false, 99);
  CHECK(testutil::bitwise_equal(g.value(inference), x));
}

TEST_CASE("softmax rows sum to one and shift invariance holds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor x = random_tensor({4, 7}, 600 + seed, 10.0);
    const Tensor s = kernels::softmax_rows(x);
    for (std::size_t i = 0; i < 4; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        CHECK(s(i, j) >= 0.0);
        row += s(i, j);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
    Tensor shifted = x;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 7; ++j) shifted(i, j) += 123.456;
    CHECK(testutil::max_abs_diff(kernels::softmax_rows(shifted), s) < 1e-12);
  }
}

TEST_CASE("dropout expectation over seeded draws stays within 2%") {
  const double rate = 0.25;
  const Tensor x = Tensor::full({10}, 2.0);
  double total = 0.0;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    const Tensor mask = kernels::dropout_mask(x.shape(), rate, 1000 + d);
    for (std::size_t i = 0; i < x.numel(); ++i) total += x[i] * mask[i];
  }
  const double mean = total / (draws * static_cast<double>(x.numel()));
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("backward of sum is all ones; relu in the dead zone is zero") {
  Graph g;
  const Var x = g.leaf(random_tensor({3, 4}, 41));
  g.backward(g.sum(x));
  for (std::size_t i = 0; i < 12; ++i) CHECK(g.grad(x)[i] == 1.0);

  Graph g2;
  const Var y = g2.leaf(Tensor::of({2}, {-1.0, -2.5}));
  g2.backward(g2.sum(g2.relu(y)));
  CHECK(g2.grad(y)[0] == 0.0);
  CHECK(g2.grad(y)[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar nodes") {
  Graph g;
  const Var x = g.leaf(Tensor({2, 2}));
  CHECK_THROWS_AS(g.backward(x), ContractError);
}

TEST_CASE("gradient of loss w.r.t. itself is one") {
  Graph g;
  const Var x = g.leaf(Tensor::of({1}, {3.0}));
  const Var loss = g.sum(x);
  g.backward(loss);
  CHECK(g.grad(loss)[0] == 1.0);
}

TEST_CASE("grad_check on trivial functions") {
  const DiffFn sum_fn = [](Graph& g, Var x) { return g.sum(x); };
  CHECK(grad_check(sum_fn, random_tensor({5}, 51), 1e-4) < 1e-10);

  // 0.5*||x||^2 at x = [3]: analytic 3, central differences exact
  const DiffFn quad = [](Graph& g, Var x) { return g.scale(g.sum(g.mul(x, x)), 0.5); };
  CHECK(grad_check(quad, Tensor::of({1}, {3.0}), 1e-4) < 1e-9);
}

TEST_CASE("grad_check rejects non-finite values") {
  const DiffFn log_fn = [](Graph& g, Var x) { return g.sum(g.log(x)); };
  CHECK_THROWS_AS(grad_check(log_fn, Tensor::of({1}, {-1.0}), 1e-4), Error);
}

// Every differentiable primitive against central differences, seeds 0-4.
TEST_CASE("primitive gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // conv2d w.r.t. input, kernels and bias
    {
      const Tensor kernel = random_tensor({2, 2, 3, 3}, 700 + seed);
      const Tensor bias = random_tensor({2}, 710 + seed);
      const Tensor input = random_tensor({1, 2, 5, 5}, 720 + seed);
      const DiffFn wrt_input = [&](Graph& g, Var x) {
        return g.sum(g.conv2d(x, g.leaf(kernel), g.leaf(bias), 1));
      };
      CHECK(grad_check(wrt_input, input, 1e-4) < 1e-4);
      const DiffFn wrt_kernel = [&](Graph& g, Var k) {
        return g.sum(g.conv2d(g.leaf(input), k, g.leaf(bias), 1));
      };
      CHECK(grad_check(wrt_kernel, kernel, 1e-4) < 1e-4);
      const DiffFn wrt_bias = [&](Graph& g, Var b) {
        return g.sum(g.conv2d(g.leaf(input), g.leaf(kernel), b, 1));
      };
      CHECK(grad_check(wrt_bias, bias, 1e-4) < 1e-4);
    }
    // dense w.r.t. all three arguments
    {
      const Tensor input = random_tensor({3, 4}, 730 + seed);
      const Tensor weights = random_tensor({4, 2}, 740 + seed);
      const Tensor bias = random_tensor({2}, 750 + seed);
      const DiffFn wrt_in = [&](Graph& g, Var x) { return g.sum(g.dense(x, g.leaf(weights), g.leaf(bias))); };
      const DiffFn wrt_w = [&](Graph& g, Var w) { return g.sum(g.dense(g.leaf(input), w, g.leaf(bias))); };
      const DiffFn wrt_b = [&](Graph& g, Var b) { return g.sum(g.dense(g.leaf(input), g.leaf(weights), b)); };
      CHECK(grad_check(wrt_in, input, 1e-4) < 1e-4);
      CHECK(grad_check(wrt_w, weights, 1e-4) < 1e-4);
      CHECK(grad_check(wrt_b, bias, 1e-4) < 1e-4);
    }
    // relu (inputs kept away from the kink), softmax, maxpool, dropout with a
    // fixed mask, and the pointwise glue ops
    {
      Tensor x = random_tensor({3, 4}, 760 + seed);
      for (std::size_t i = 0; i < x.numel(); ++i) {
        if (std::abs(x[i]) < 5e-3) x[i] = 0.1;
      }
      const DiffFn relu_fn = [](Graph& g, Var v) { return g.sum(g.mul(g.relu(v), g.relu(v))); };
      CHECK(grad_check(relu_fn, x, 1e-4) < 1e-4);

      const Tensor w = random_tensor({3, 4}, 765 + seed);
      const DiffFn softmax_fn = [&](Graph& g, Var v) { return g.sum(g.mul_const(g.softmax(v), w)); };
      CHECK(grad_check(softmax_fn, x, 1e-4) < 1e-4);

      // window values kept at least 1e-3 apart so the +-eps probes of the
      // finite-difference oracle cannot flip an argmax
      Tensor pool_in = random_tensor({1, 2, 6, 6}, 770 + seed);
      for (std::size_t i = 0; i < pool_in.numel(); ++i) {
        pool_in[i] = std::round(pool_in[i] * 10.0) / 10.0 + static_cast<double>(i % 36) * 1e-3;
      }
      const DiffFn pool_fn = [](Graph& g, Var v) { return g.sum(g.mul(g.maxpool2(v), g.maxpool2(v))); };
      CHECK(grad_check(pool_fn, pool_in, 1e-4) < 1e-4);

      const DiffFn drop_fn = [seed](Graph& g, Var v) { return g.sum(g.dropout(v, 0.25, true, 42 + seed)); };
      CHECK(grad_check(drop_fn, x, 1e-4) < 1e-4);

      Tensor pos = random_tensor({6}, 780 + seed);
      for (std::size_t i = 0; i < pos.numel(); ++i) pos[i] = 0.1 + std::abs(pos[i]);
      const DiffFn log_fn = [](Graph& g, Var v) { return g.sum(g.log(v)); };
      CHECK(grad_check(log_fn, pos, 1e-4) < 1e-4);

      const DiffFn glue_fn = [](Graph& g, Var v) {
        const Var a = g.scale(g.add_scalar(v, 0.5), 2.0);
        return g.mean(g.mul(g.sub(a, v), g.add(v, v)));
      };
      CHECK(grad_check(glue_fn, x, 1e-4) < 1e-4);
    }
  }
}

// Random small network: conv -> relu -> dense -> softmax -> weighted log loss.
TEST_CASE("composed network gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor input = random_tensor({2, 1, 6, 6}, 800 + seed);
    const Tensor kernel = random_tensor({2, 1, 3, 3}, 810 + seed);
    const Tensor bias = random_tensor({2}, 820 + seed);
    const Tensor dense_w = random_tensor({8, 2}, 830 + seed);
    const Tensor dense_b = random_tensor({2}, 840 + seed);
    const std::vector<int> labels{1, 0};
    const ClassWeights weights{1.6, 0.7};

    const auto network = [&](Graph& g, Var kern) {
      Var x = g.conv2d(g.leaf(input), kern, g.leaf(bias), 1);
      x = g.relu(x);
      x = g.maxpool2(x);
      x = g.flatten2(x);
      x = g.dense(x, g.leaf(dense_w), g.leaf(dense_b));
      const Var probs = g.softmax(x);
      return weighted_log_loss_node(g, probs, labels, weights);
    };
    CHECK(grad_check(network, kernel, 1e-4) < 1e-4);
  }
}
