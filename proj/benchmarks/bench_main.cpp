#include <benchmark/benchmark.h>

#include "synaug/config.hpp"
#include "synaug/generators.hpp"
#include "synaug/trainer.hpp"
#include "synaug/vtss.hpp"

using namespace synaug;

namespace {

LabeledDataset sample(const char* preset, Index n0, Index n1) {
  return load_model(preset).sample(n0, n1, RngStream(1));
}

void BM_KnnMinority(benchmark::State& state) {
  const RowMatrix pts = split_by_class(sample("mean-shift-d20-cube", 10, state.range(0))).minority;
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn_minority(pts, q, 5));
    q = (q + 1) % static_cast<std::size_t>(pts.rows());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnMinority)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oN);

void BM_FitLogistic(benchmark::State& state) {
  const LabeledDataset d = sample("fig5-left-mixture", state.range(0), state.range(0) / 20);
  for (auto _ : state) benchmark::DoNotOptimize(fit_erm(d, LossSpec::logistic(true), FitConfig{}));
  state.SetItemsProcessed(state.iterations() * d.rows());
}
BENCHMARK(BM_FitLogistic)->Arg(1000)->Arg(4000)->Arg(16000)->Unit(benchmark::kMillisecond);

void BM_FitSquaredClosedForm(benchmark::State& state) {
  const LabeledDataset d = sample("mean-shift-d20-cube", state.range(0), state.range(0) / 20);
  FitConfig cfg;
  cfg.step_rule = StepRule::ClosedForm;
  for (auto _ : state) benchmark::DoNotOptimize(fit_erm(d, LossSpec::squared_centered(), cfg));
  state.SetItemsProcessed(state.iterations() * d.rows());
}
BENCHMARK(BM_FitSquaredClosedForm)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Generate(benchmark::State& state) {
  const LabeledDataset d = sample("mean-shift-d20-cube", 2000, 100);
  const RowMatrix minority = split_by_class(d).minority;
  GeneratorSpec spec;
  spec.kind = static_cast<GeneratorKind>(state.range(0));
  state.SetLabel(std::string(to_string(spec.kind)));
  for (auto _ : state) benchmark::DoNotOptimize(generate(spec, minority, &d, 1900, RngStream(2)));
  state.SetItemsProcessed(state.iterations() * 1900);
}
BENCHMARK(BM_Generate)
    ->Arg(static_cast<int>(GeneratorKind::Bootstrap))
    ->Arg(static_cast<int>(GeneratorKind::Smote))
    ->Arg(static_cast<int>(GeneratorKind::BorderlineSmote))
    ->Arg(static_cast<int>(GeneratorKind::Adasyn))
    ->Arg(static_cast<int>(GeneratorKind::GaussianFit))
    ->Unit(benchmark::kMillisecond);

// The squared loss takes the sufficient-statistics path, logistic refits per
// grid point and fold.
void BM_VtssTune(benchmark::State& state) {
  const bool squared = state.range(0) == 0;
  const LabeledDataset d = squared ? sample("mean-shift-d20-cube", 2000, 100) : sample("fig5-left-mixture", 2000, 100);
  VtssConfig cfg;
  cfg.gamma_grid = linspace(0.0, 2.0, 21);
  cfg.loss = squared ? LossSpec::squared_centered() : LossSpec::logistic(true);
  if (squared) cfg.fit.step_rule = StepRule::ClosedForm;
  state.SetLabel(squared ? "squared" : "logistic");
  for (auto _ : state) benchmark::DoNotOptimize(vtss_tune(d, cfg, RngStream(3)));
}
BENCHMARK(BM_VtssTune)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
