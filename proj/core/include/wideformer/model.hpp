// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Concrete finite-width parameters.

#ifndef WIDEFORMER_MODEL_HPP_
#define WIDEFORMER_MODEL_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "wideformer/plan.hpp"

namespace wf {

enum class Distribution { Normal, Uniform };

// Per-head matrices are stacked: rows h*C + c of Q, K, V hold head h's
// channel c; columns h*C + c of U hold the same.
struct BlockParams {
  BlockKind kind = BlockKind::Mlp;
  Eigen::MatrixXd Q, K, V, U;  // n x n each (MHSA)
  Eigen::MatrixXd W;           // Mn x n (MLP)
  Eigen::MatrixXd X;           // n x Mn (MLP)
};

struct ModelParams {
  ArchSpec arch;
  double n_rescale = 1.0;
  Eigen::MatrixXd embed;   // Patch or WordEmb: n x n_in
  Eigen::MatrixXd pos;     // PosEmb: T x n
  std::vector<BlockParams> blocks;
  Eigen::MatrixXd head_w;  // n_out x n (absent for tied heads)
  Eigen::VectorXd head_b;  // n_out
  Distribution dist = Distribution::Normal;
  std::uint64_t seed = 0;

  // Same shapes, all zeros (used for gradients).
  ModelParams zeros_like() const;
  // Visits every trainable tensor together with its group.
  void for_each(const std::function<void(ParamGroup, Eigen::Ref<Eigen::MatrixXd>)>& fn);
  void for_each(const std::function<void(ParamGroup, Eigen::Ref<const Eigen::MatrixXd>)>& fn) const;
};

ModelParams init_model(const ArchSpec& arch, const ScalingPlan& plan, std::uint64_t seed,
                       Distribution dist = Distribution::Normal);

}  // namespace wf

#endif  // WIDEFORMER_MODEL_HPP_
