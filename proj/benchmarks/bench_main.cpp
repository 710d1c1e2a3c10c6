// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "wideformer/gaussian.hpp"
#include "wideformer/kernels.hpp"
#include "wideformer/lab.hpp"
#include "wideformer/ntk.hpp"

using namespace wf;

namespace {

ArchSpec desk(int n) {
  ArchSpec a;
  a.n = n;
  a.H = 4;
  a.T = 4;
  a.blocks = {BlockKind::MhsaBidirectional, BlockKind::Mlp};
  return a;
}

void BM_GaussPair(benchmark::State& st) {
  const ActFn f{Activation::Gelu, false};
  for (auto _ : st)
    benchmark::DoNotOptimize(gauss_pair_expect(f, f, 1.0, 0.3, 0.8, int(st.range(0))));
}
BENCHMARK(BM_GaussPair)->Arg(32)->Arg(64);

void BM_AttentionMoments(benchmark::State& st) {
  const ArchSpec a = desk(64);
  const Inputs in = make_inputs(a, 2, 1);
  const KernelTrace kt = propagate_kernels(a, make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent)), in);
  const AttnKernel A = qk_covariance(*kt.before_block(0).F, 0.5, 0.5);
  for (auto _ : st) benchmark::DoNotOptimize(attention_moments(A, false, st.range(0), 1, 0));
}
BENCHMARK(BM_AttentionMoments)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_PropagateNtk(benchmark::State& st) {
  const ArchSpec a = desk(64);
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  const Inputs in = make_inputs(a, 2, 1);
  for (auto _ : st) benchmark::DoNotOptimize(propagate_ntk(a, p, in));
}
BENCHMARK(BM_PropagateNtk)->Unit(benchmark::kMillisecond);

void BM_ForwardPass(benchmark::State& st) {
  const ArchSpec a = desk(int(st.range(0)));
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  const ModelParams P = init_model(a, p, 1);
  const Inputs in = make_inputs(a, 2, 1);
  for (auto _ : st) benchmark::DoNotOptimize(forward_pass(P, in));
}
BENCHMARK(BM_ForwardPass)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_NtkSingleInit(benchmark::State& st) {
  const ArchSpec a = desk(int(st.range(0)));
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  const ModelParams P = init_model(a, p, 1);
  const Inputs in = make_inputs(a, 2, 1);
  const auto ch = contact_free_channels(a, in, 4);
  for (auto _ : st) benchmark::DoNotOptimize(ntk_single_init(P, p, in, ch));
}
BENCHMARK(BM_NtkSingleInit)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
