#include <benchmark/benchmark.h>

#include "eaf/field.hpp"
#include "eaf/geometry.hpp"

namespace {

eaf::CameraView bench_view() {
  eaf::CameraView v;
  v.view_id = 1;
  v.intrinsics << 100, 0, 120, 0, 100, 60, 0, 0, 1;
  v.image_width = 240;
  v.image_height = 120;
  v.rotation << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  v.translation = -v.rotation * Eigen::Vector3d(0, 0, 1.5);
  return v;
}

void BM_ComputeField(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  const eaf::BevGrid grid = eaf::BevGrid::centered(cells, cells, 0.5);
  const eaf::CameraView view = bench_view();
  eaf::FieldConfig cfg;
  for (auto _ : state) {
    auto field = eaf::compute_field(grid, view, 60, 30, cfg);
    benchmark::DoNotOptimize(field.weights.data());
  }
  state.SetItemsProcessed(state.iterations() * grid.num_cells() * 60 * 30);
}
BENCHMARK(BM_ComputeField)->Arg(8)->Arg(16)->Arg(32);

void BM_ComputeFieldLearnable(benchmark::State& state) {
  const eaf::BevGrid grid = eaf::BevGrid::centered(16, 16, 0.5);
  const eaf::CameraView view = bench_view();
  eaf::FieldConfig cfg;
  cfg.lambda_learnable = true;
  for (auto _ : state) {
    auto field = eaf::compute_field(grid, view, 60, 30, cfg);
    benchmark::DoNotOptimize(field.dw_dlambda.data());
  }
}
BENCHMARK(BM_ComputeFieldLearnable);

void BM_FieldBank(benchmark::State& state) {
  const eaf::BevGrid grid = eaf::BevGrid::centered(16, 16, 0.5);
  std::vector<eaf::CameraView> views(static_cast<std::size_t>(state.range(0)),
                                     bench_view());
  for (std::size_t i = 0; i < views.size(); ++i)
    views[i].view_id = static_cast<int>(i) + 1;
  eaf::FieldConfig cfg;
  for (auto _ : state) {
    auto bank = eaf::field_bank(grid, views, {0.25, 0.5}, cfg);
    benchmark::DoNotOptimize(bank.data());
  }
}
BENCHMARK(BM_FieldBank)->Arg(2)->Arg(6);

void BM_RecomputeLambda(benchmark::State& state) {
  const eaf::BevGrid grid = eaf::BevGrid::centered(16, 16, 0.5);
  const eaf::CameraView view = bench_view();
  eaf::FieldConfig cfg;
  cfg.lambda_learnable = true;
  auto field = eaf::compute_field(grid, view, 60, 30, cfg);
  for (auto _ : state) {
    cfg.lambda = 1.0 + 1e-6;
    eaf::recompute_lambda(field, grid, view, cfg);
    benchmark::DoNotOptimize(field.weights.data());
  }
}
BENCHMARK(BM_RecomputeLambda);

}  // namespace
