// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Mean neural tangent kernel recursion (SGD learning-rate factors).
//
// Each block maps  Theta -> additive + Theta + cumulative(Theta)  where the
// cumulative part is linear in Theta.  Propagating each parameter group's
// share separately through the same linear maps yields the per-group
// decomposition of the output kernel.

#ifndef WIDEFORMER_NTK_HPP_
#define WIDEFORMER_NTK_HPP_

#include <array>
#include <string>
#include <vector>

#include "wideformer/kernels.hpp"

namespace wf {

using GroupKernels = std::array<Eigen::MatrixXd, kNumGroups>;  // empty = absent

PairKernel stem_ntk(const PairKernel& G0, double Lambda_emb, double Lambda_PE);
PairKernel stem_ntk(const PairKernel& G0, const ScalingPlan& plan, const ArchSpec& arch);

// 1 / (sqrt(G_pp + eps) sqrt(G_qq + eps))
Eigen::MatrixXd ln_backward_factor(const PairKernel& G, double eps);

struct BlockNtk {
  PairKernel theta;
  GroupKernels additive;
};

// Linear token-mixing maps applied to the LN-suppressed kernel.
Eigen::MatrixXd mhsa_cumulative(const Eigen::MatrixXd& theta, const PairKernel& G,
                                const PairKernel& F, const AttnMoments& moments,
                                const TheoryConstants& tc, double eps);
GroupKernels mhsa_additive(const PairKernel& F, const AttnMoments& moments,
                           const TheoryConstants& tc);
BlockNtk mhsa_ntk_step(const PairKernel& theta, const PairKernel& G, const PairKernel& F,
                       const AttnMoments& moments, const TheoryConstants& tc, double eps);

Eigen::MatrixXd mlp_cumulative(const Eigen::MatrixXd& theta, const PairKernel& G,
                               const PairKernel& F, Activation act, const TheoryConstants& tc,
                               double eps, int order = kDefaultQuadratureOrder);
GroupKernels mlp_additive(const PairKernel& F, Activation act, const TheoryConstants& tc,
                          int order = kDefaultQuadratureOrder);
BlockNtk mlp_ntk_step(const PairKernel& theta, const PairKernel& G, const PairKernel& F,
                      Activation act, const TheoryConstants& tc, double eps,
                      int order = kDefaultQuadratureOrder);

Eigen::MatrixXd head_cumulative(const Eigen::MatrixXd& theta, const PairKernel& G,
                                const TheoryConstants& tc, double eps);
GroupKernels head_additive(const PairKernel& F, const TheoryConstants& tc, const ArchSpec& arch);
BlockNtk head_ntk(const PairKernel& theta, const PairKernel& G, const PairKernel& F,
                  const TheoryConstants& tc, const ArchSpec& arch);

struct NtkEntry {
  std::string label;
  PairKernel theta;
  GroupKernels additive;  // added at this block
  GroupKernels by_group;  // decomposition of theta by originating group
};

struct NtkTrace {
  std::vector<NtkEntry> entries;  // stem, blocks..., head
  Eigen::MatrixXd pooled;
  GroupKernels pooled_by_group;
  const NtkEntry& head() const { return entries.back(); }
};

NtkTrace propagate_ntk(const KernelTrace& kernels, const ArchSpec& arch, const ScalingPlan& plan,
                       int quadrature_order = kDefaultQuadratureOrder);
NtkTrace propagate_ntk(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                       const PropagateOptions& options = {});

// block,label,pair1,pair2,theta,group,group_additive
std::string ntk_trace_csv(const NtkTrace& trace);

}  // namespace wf

#endif  // WIDEFORMER_NTK_HPP_
