#include <benchmark/benchmark.h>

#include "raypath/nn.hpp"
#include "raypath/sampler.hpp"
#include "raypath/scenes.hpp"
#include "raypath/tracer.hpp"

using namespace raypath;

namespace {

Scene make_scene(int buildings_per_side) {
  CanyonParams params;
  params.n_buildings_per_side = buildings_per_side;
  params.keep_min = params.keep_max = 1.0;
  Rng rng = Rng::seeded(1);
  return generate_canyon(params, rng);
}

FlowModel make_model(int d, int k) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.k = k;
  Rng rng = Rng::seeded(2);
  return make_flow_model(cfg, rng);
}

void BM_ValidateCandidate(benchmark::State& state) {
  const Scene scene = make_scene(static_cast<int>(state.range(0)));
  const PreparedScene ps(scene);
  const int n = static_cast<int>(scene.object_count());
  std::int32_t i = 0, j = 0;
  for (auto _ : state) {
    const PathCandidate cand{{i, j}};
    benchmark::DoNotOptimize(validate(ps, cand).reward);
    if (++j >= n) {
      j = 0;
      if (++i >= n) i = 0;
    }
  }
}
BENCHMARK(BM_ValidateCandidate)->Arg(3)->Arg(10)->Arg(25);

void BM_EnumerateValidPaths(benchmark::State& state) {
  const Scene scene = make_scene(static_cast<int>(state.range(0)));
  const PreparedScene ps(scene);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enumerate_valid_paths(ps, 2, false, 1'000'000'000ULL).size());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(candidate_count(scene.object_count(), 2, false)));
}
BENCHMARK(BM_EnumerateValidPaths)->Arg(2)->Arg(5);

void BM_MlpForwardBatch(benchmark::State& state) {
  const FlowModel model = make_model(static_cast<int>(state.range(0)), 2);
  const std::size_t rows = 128;
  Tensor x = Tensor::zeros({rows, 9});
  Rng rng = Rng::seeded(3);
  for (double& v : x.data) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward(model.object_encoder, x).data.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * rows);
}
BENCHMARK(BM_MlpForwardBatch)->Arg(16)->Arg(64)->Arg(128);

void BM_SampleTrajectory(benchmark::State& state) {
  const Scene scene = make_scene(3);
  const FlowModel model = make_model(static_cast<int>(state.range(0)), 2);
  const EncodedScene encoded(model, scene);
  SampleOptions opts;
  opts.epsilon = 0.0;
  Rng rng = Rng::seeded(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_trajectory(model, encoded, opts, rng).reward);
  }
}
BENCHMARK(BM_SampleTrajectory)->Arg(8)->Arg(32)->Arg(128);

void BM_EncodeScene(benchmark::State& state) {
  const Scene scene = make_scene(static_cast<int>(state.range(0)));
  const FlowModel model = make_model(32, 2);
  const Tensor inputs = canonical_object_inputs(scene);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_scene(model, inputs).scene_embedding.data.data());
  }
}
BENCHMARK(BM_EncodeScene)->Arg(3)->Arg(10)->Arg(25);

}  // namespace

BENCHMARK_MAIN();
