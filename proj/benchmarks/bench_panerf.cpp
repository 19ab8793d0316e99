#include <random>

#include <benchmark/benchmark.h>

#include <panerf/augment.hpp>
#include <panerf/field.hpp>
#include <panerf/losses.hpp>
#include <panerf/parallel.hpp>
#include <panerf/renderer.hpp>
#include <panerf/toy_scene.hpp>

using namespace panerf;

namespace {

Matrix3X<float> random_points(std::mt19937_64& rng, Eigen::Index n, bool unit) {
  std::normal_distribution<float> g;
  Matrix3X<float> m(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.col(i) = Eigen::Vector3f(g(rng), g(rng), g(rng));
    if (unit) m.col(i).normalize();
  }
  return m;
}

FieldConfig bench_field(int width) {
  auto c = FieldConfig::desk_scale();
  c.width = width;
  return c;
}

// Args: batch size, trunk width.
void BM_FieldForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto params = FieldParams<float>::initialized(bench_field(int(state.range(1))), rng);
  const auto pos = random_points(rng, state.range(0), false);
  const auto dir = random_points(rng, state.range(0), true);
  for (auto _ : state) benchmark::DoNotOptimize(field_forward(params, pos, dir));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FieldForward)->Args({4096, 32})->Args({16384, 32})->Args({4096, 64});

void BM_FieldForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto params = FieldParams<float>::initialized(bench_field(int(state.range(1))), rng);
  const auto pos = random_points(rng, state.range(0), false);
  const auto dir = random_points(rng, state.range(0), true);
  FieldOutputs<float> upstream{MatrixX<float>::Ones(1, state.range(0)), MatrixX<float>::Ones(3, state.range(0))};
  auto grads = FieldParams<float>::zeros(params.config);
  for (auto _ : state) {
    FieldCache<float> cache;
    benchmark::DoNotOptimize(field_forward(params, pos, dir, &cache));
    field_backward(params, cache, upstream, grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FieldForwardBackward)->Args({4096, 32})->Args({16384, 32});

// Args: rays, samples per ray.
void BM_Composite(benchmark::State& state) {
  const auto rays = state.range(0), n = state.range(1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 2.0f);
  RaySampleBatch<float> s;
  s.t.resize(n, rays);
  s.delta = MatrixX<float>::Constant(n, rays, 4.0f / float(n));
  s.density = MatrixX<float>::NullaryExpr(n, rays, [&] { return u(rng); });
  s.color = Matrix3X<float>::NullaryExpr(3, rays * n, [&] { return u(rng) / 2; });
  for (Eigen::Index r = 0; r < rays; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) s.t(i, r) = 2.0f + 4.0f * float(i) / float(n);
  }
  for (auto _ : state) benchmark::DoNotOptimize(composite(s));
  state.SetItemsProcessed(state.iterations() * rays * n);
}
BENCHMARK(BM_Composite)->Args({1024, 64})->Args({4096, 64});

void BM_CompositeBackward(benchmark::State& state) {
  const auto rays = state.range(0), n = state.range(1);
  RaySampleBatch<float> s;
  s.t.resize(n, rays);
  s.delta = MatrixX<float>::Constant(n, rays, 4.0f / float(n));
  s.density = MatrixX<float>::Constant(n, rays, 0.7f);
  s.color = Matrix3X<float>::Constant(3, rays * n, 0.5f);
  for (Eigen::Index r = 0; r < rays; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) s.t(i, r) = 2.0f + 4.0f * float(i) / float(n);
  }
  composite(s);
  const Matrix3X<float> g = Matrix3X<float>::Ones(3, rays);
  const MatrixX<float> wg = MatrixX<float>::Ones(n, rays);
  for (auto _ : state) benchmark::DoNotOptimize(composite_backward(s, g, wg));
  state.SetItemsProcessed(state.iterations() * rays * n);
}
BENCHMARK(BM_CompositeBackward)->Args({1024, 64});

void BM_IpLoss(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::MatrixXd w = Eigen::MatrixXd::NullaryExpr(64, state.range(0), [&] { return u(rng) / 32; });
  for (auto _ : state) benchmark::DoNotOptimize(ip_loss(w, 1e-6));
}
BENCHMARK(BM_IpLoss)->Arg(1024);

// Arg: image side.
void BM_ForwardWarp(benchmark::State& state) {
  ToySceneOptions o;
  o.width = o.height = int(state.range(0));
  const auto scene = render_toy_scene(ToySceneSpec::sphere_and_box(), {orbit_pose(4, 30, 30)}, o);
  const auto& f = scene.frames[0];
  const auto target = perturb_pose(f.pose, {5.0, -5.0, 5.0}, Vec3::Zero());
  const auto rel = compose_relative(f.pose, target);
  for (auto _ : state) benchmark::DoNotOptimize(forward_warp(f.image, *f.depth, scene.camera, rel));
  state.SetItemsProcessed(state.iterations() * o.width * o.height);
}
BENCHMARK(BM_ForwardWarp)->Arg(48)->Arg(128);

void BM_RenderTrainingBatch(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto params = FieldParams<float>::initialized(FieldConfig::desk_scale(), rng);
  const auto camera = Intrinsics::from_horizontal_fov(0.69, 32, 32);
  auto rays = camera_rays<float>(camera, orbit_pose(4, 0, 30), {2.0, 6.0});
  RenderSettings settings;
  settings.samples_per_ray = int(state.range(0));
  const Matrix3X<float> g = Matrix3X<float>::Ones(3, rays.size());
  for (auto _ : state) {
    auto pass = render_rays(params, rays, settings, &rng, true);
    auto grads = FieldParams<float>::zeros(params.config);
    render_rays_backward(params, pass, g, MatrixX<float>(), settings, grads);
    benchmark::DoNotOptimize(grads);
  }
  state.SetItemsProcessed(state.iterations() * rays.size());
}
BENCHMARK(BM_RenderTrainingBatch)->Arg(32)->Arg(64);

}  // namespace

int main(int argc, char** argv) {
  set_num_threads(1);
  retain_freed_memory();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
