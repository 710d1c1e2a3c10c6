// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Infinite-width forward kernels: preactivation kernel G and LN kernel F.

#ifndef WIDEFORMER_KERNELS_HPP_
#define WIDEFORMER_KERNELS_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wideformer/attention.hpp"
#include "wideformer/gaussian.hpp"
#include "wideformer/plan.hpp"
#include "wideformer/types.hpp"

namespace wf {

PairKernel input_kernel(const Inputs& inputs);
PairKernel stem_kernel(const PairKernel& G0, double C_emb, double C_PE);
PairKernel layer_norm_kernel(const PairKernel& G, double eps);
PairKernel mhsa_kernel_step(const PairKernel& G, const PairKernel& F, double C_U, double C_V,
                            const AttnMoments& moments);
PairKernel mlp_kernel_step(const PairKernel& G, const PairKernel& F, double C_W, double C_X,
                           Activation activation, int order = kDefaultQuadratureOrder);

// <f(w1) g(w2)> over C_W * F, entry by entry.
Eigen::MatrixXd pair_expectation(const PairKernel& F, double scale, const ActFn& f,
                                 const ActFn& g, int order = kDefaultQuadratureOrder);

struct HeadKernel {
  PairKernel G;
  Eigen::MatrixXd pooled;  // |D| x |D|, empty unless token-mean pooling
};
HeadKernel head_kernel(const PairKernel& F, double C, Pooling pooling);

// (1/T^2) sum over token pairs of each sample block.
Eigen::MatrixXd pool_tokens(const PairKernel& K);

struct TraceEntry {
  std::string label;
  PairKernel G;
  std::optional<PairKernel> F;
  std::shared_ptr<const AttnMoments> moments;  // moments that produced G
};

struct KernelTrace {
  std::vector<TraceEntry> entries;  // input, stem, blocks..., head
  Eigen::MatrixXd pooled;

  const TraceEntry& head() const { return entries.back(); }
  // Entry feeding residual block `b` (0-based) or the head (b == depth).
  const TraceEntry& before_block(int b) const { return entries[1 + b]; }
};

struct PropagateOptions {
  long attention_samples = kDefaultAttentionSamples;
  int quadrature_order = kDefaultQuadratureOrder;
  std::uint64_t seed = 1;
};

KernelTrace propagate_kernels(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                              const PropagateOptions& options = {});

// block,label,pair1,pair2,G,F
std::string kernel_trace_csv(const KernelTrace& trace);

}  // namespace wf

#endif  // WIDEFORMER_KERNELS_HPP_
