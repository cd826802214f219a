// Microbenchmarks for the hot paths: raw matmul, one encoder sublayer in both
// mask paths, a full forward/backward step, and the exact permutation test.

#include <benchmark/benchmark.h>

#include "gbt/analysis.hpp"
#include "gbt/bimodal.hpp"
#include "gbt/model.hpp"
#include "gbt/train.hpp"

namespace {

using namespace gbt;

Mat random_mat(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (double& x : m.a) x = rng.normal();
  return m;
}

void bm_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  const Mat a = random_mat(n, n, rng);
  const Mat b = random_mat(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mm(a, b));
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);

void bm_encode(benchmark::State& state) {
  const bool skip = state.range(0) != 0;
  ArchSpec spec = preset("vilbert");
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(2));
  Rng rng(3);
  const Mat x_l = random_mat(10, spec.d, rng);
  const Mat x_v = random_mat(9, spec.d, rng);
  const MaskPath path = skip ? MaskPath::skip : MaskPath::additive;
  for (auto _ : state) benchmark::DoNotOptimize(encode_bimodal(x_l, x_v, ps, spec, path));
}
BENCHMARK(bm_encode)->Arg(0)->Arg(1)->ArgNames({"skip"});

void bm_train_step(benchmark::State& state) {
  ArchSpec spec = preset("uniter");
  SynthSpec ss;
  ss.n_pairs = 32;
  Dataset data = prepare_dataset(gen_synth(ss), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(4));
  TrainConfig cfg;
  cfg.max_steps = 1;
  cfg.batch_size = 16;
  for (auto _ : state) benchmark::DoNotOptimize(train(spec, ps, data, cfg));
}
BENCHMARK(bm_train_step)->Unit(benchmark::kMillisecond);

void bm_exact_perm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(5);
  std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal() + 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(exact_perm_test(a, b));
}
BENCHMARK(bm_exact_perm)->Arg(6)->Arg(10)->Arg(13);

}  // namespace

BENCHMARK_MAIN();
