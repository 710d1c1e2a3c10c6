// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Exact forward pass and reverse-mode output Jacobians.
//
// The backward pass takes a stack of Kc cotangents for one sample (rows
// c*T + t) and propagates them together, so every linear map becomes one
// matrix product.  It returns the cotangent arriving at each linear layer's
// output; gradients and gradient inner products are formed from these.

#ifndef WIDEFORMER_TRANSFORMER_HPP_
#define WIDEFORMER_TRANSFORMER_HPP_

#include <vector>

#include "wideformer/model.hpp"
#include "wideformer/types.hpp"

namespace wf {

struct BlockCache {
  // MHSA
  Eigen::MatrixXd q, k, v, o;             // T x n
  std::vector<Eigen::MatrixXd> logits;    // per head, T x T (W~)
  std::vector<Eigen::MatrixXd> omega;     // per head, T x T
  // MLP
  Eigen::MatrixXd w, a;                   // T x Mn
};

struct SampleTrace {
  Eigen::MatrixXd x;                      // stem input: patches or one-hot-free copy
  std::vector<Eigen::MatrixXd> z;         // z[0] stem output, z[b+1] after block b
  std::vector<Eigen::MatrixXd> s;         // s[b] = LN(z[b])
  std::vector<Eigen::VectorXd> inv_std;   // per LN, per token
  std::vector<BlockCache> blocks;
  Eigen::MatrixXd f;                      // T x out
  Eigen::RowVectorXd pooled;              // token-mean output (if pooling)
};

struct ForwardTrace {
  std::vector<SampleTrace> samples;
};

SampleTrace forward_sample(const ModelParams& params, const Inputs& inputs, int alpha);
ForwardTrace forward_pass(const ModelParams& params, const Inputs& inputs);

struct BlockSignals {
  Eigen::MatrixXd dq, dk, dv;  // at q, k, v (MHSA)
  Eigen::MatrixXd dr;          // at the residual branch output (U or X output)
  Eigen::MatrixXd dw;          // at the MLP preactivation (after sigma')
};

struct Signals {
  int cotangents = 0;
  Eigen::MatrixXd df;   // (Kc T) x out, the cotangents themselves
  Eigen::MatrixXd dz1;  // at the stem output
  std::vector<BlockSignals> blocks;
};

// `cot` is (Kc*T) x out; cotangent c occupies rows [c*T, (c+1)*T).
Signals backward_sample(const ModelParams& params, const SampleTrace& trace,
                        const Eigen::MatrixXd& cot);

// Adds cotangent c's parameter gradient (all cotangents when c < 0).
void accumulate_gradient(const ModelParams& params, const Inputs& inputs, int alpha,
                         const SampleTrace& trace, const Signals& sig, int c, ModelParams& grad);

// Vector-Jacobian product: cotangents[alpha] is T x out.
ModelParams vjp(const ModelParams& params, const Inputs& inputs,
                const std::vector<Eigen::MatrixXd>& cotangents);

struct OutputIndex {
  int alpha = 0, t = 0, i = 0;  // t = -1 selects the pooled output
};

// df/dtheta for each selected output component, as gradient-shaped params.
std::vector<ModelParams> output_jacobian(const ModelParams& params, const Inputs& inputs,
                                         const std::vector<OutputIndex>& selector);

// Row-wise layer norm (gamma = 1, beta = 0); returns inverse std per row.
Eigen::MatrixXd layer_norm_rows(const Eigen::MatrixXd& z, double eps, Eigen::VectorXd& inv_std);

}  // namespace wf

#endif  // WIDEFORMER_TRANSFORMER_HPP_
