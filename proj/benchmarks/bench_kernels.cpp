#include <benchmark/benchmark.h>

#include "xaikit/cam.hpp"
#include "xaikit/image.hpp"
#include "xaikit/kernels.hpp"
#include "xaikit/matmul.hpp"
#include "xaikit/model.hpp"
#include "xaikit/random.hpp"

using namespace xaikit;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform() - 0.5;
  return t;
}

void BM_GemmNN(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1);
  const Tensor b = random_tensor({n, n}, 2);
  Tensor c({n, n});
  for (auto _ : state) {
    gemm_nn(n, n, n, 1.0, a.data(), b.data(), 0.0, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_GemmNN)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

void BM_Conv2dForward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const Tensor input = random_tensor({1, 32, side, side}, 3);
  const Tensor kernels = random_tensor({64, 32, 3, 3}, 4);
  const Tensor bias = random_tensor({64}, 5);
  for (auto _ : state) {
    Tensor out = kernels::conv2d_forward(input, kernels, bias, 1);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(28)->Arg(56)->Arg(112);

void BM_Conv2dBackward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const Tensor input = random_tensor({1, 32, side, side}, 6);
  const Tensor kernels = random_tensor({64, 32, 3, 3}, 7);
  const Tensor bias = random_tensor({64}, 8);
  const Tensor out = kernels::conv2d_forward(input, kernels, bias, 1);
  const Tensor grad_out = random_tensor(out.shape(), 9);
  for (auto _ : state) {
    Tensor gi(input.shape()), gk(kernels.shape()), gb(bias.shape());
    kernels::conv2d_backward(input, kernels, 1, grad_out, &gi, &gk, &gb);
    benchmark::DoNotOptimize(gi.data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(28)->Arg(56);

void BM_Maxpool(benchmark::State& state) {
  const Tensor input = random_tensor({8, 64, 56, 56}, 10);
  for (auto _ : state) {
    Tensor out = kernels::maxpool2_forward(input);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Maxpool);

void BM_Softmax(benchmark::State& state) {
  const Tensor input = random_tensor({256, 1000}, 11);
  for (auto _ : state) {
    Tensor out = kernels::softmax_rows(input);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Softmax);

void BM_ResizeBilinear(benchmark::State& state) {
  const Tensor image = random_tensor({3, 128, 128}, 12);
  for (auto _ : state) {
    Tensor out = resize_bilinear(image, 224, 224);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ResizeBilinear);

void BM_ModelForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.input_height = cfg.input_width = 64;
  cfg.input_channels = 1;
  const CnnModel model = CnnModel::build(cfg, 13);
  const Tensor batch = random_tensor({4, 1, 64, 64}, 14);
  for (auto _ : state) {
    Tensor probs = model.forward(batch);
    benchmark::DoNotOptimize(probs.data());
  }
}
BENCHMARK(BM_ModelForward);

void BM_GradCam(benchmark::State& state) {
  ModelConfig cfg;
  cfg.input_height = cfg.input_width = 64;
  cfg.input_channels = 1;
  const CnnModel model = CnnModel::build(cfg, 15);
  const CnnGradientView view(model);
  const Tensor image = random_tensor({1, 64, 64}, 16);
  for (auto _ : state) {
    Heatmap hm = grad_cam(view, image, 1, "conv2");
    benchmark::DoNotOptimize(hm.values.data());
  }
}
BENCHMARK(BM_GradCam);

}  // namespace

BENCHMARK_MAIN();
