// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Statistics of the query-key dot product and of the softmax attention
// matrix it induces.

#ifndef WIDEFORMER_ATTENTION_HPP_
#define WIDEFORMER_ATTENTION_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "wideformer/types.hpp"

namespace wf {

inline constexpr long kDefaultAttentionSamples = 4096;

// Covariance of W~ over (alpha; t, t') with index (alpha*T + t)*T + t'.
struct AttnKernel {
  Eigen::MatrixXd A;
  int samples = 0;
  int T = 0;
  int index(int alpha, int t, int tp) const { return (alpha * T + t) * T + tp; }
  int dim() const { return samples * T * T; }
};

AttnKernel qk_covariance(const PairKernel& F, double C_Q, double C_K);

// Symmetrize and clip eigenvalues below -1e-10|A| up to +1e-12|A|; returns
// the symmetric square root V diag(sqrt(lambda)) V^T.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A);

// Row-wise softmax of one sample's T x T logits (causal when masked).
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits, bool masked);

struct AttnMoments {
  int samples = 0;
  int T = 0;
  bool masked = false;
  long n_samples = 0;
  // E[Omega_{a1;t1t1'} Omega_{a2;t2t2'}], indices as in AttnKernel.
  Eigen::MatrixXd omega_omega, omega_omega_se;
  // E[J_{a1;t1,t1',t1''} J_{a2;t2,t2',t2''}] with J = dOmega_{tt'}/dW~_{tt''};
  // index ((alpha*T + t)*T + t')*T + t''.  Derivatives with respect to
  // another row vanish identically and are not stored.
  Eigen::MatrixXd jac_jac, jac_jac_se;

  int omega_index(int a, int t, int tp) const { return (a * T + t) * T + tp; }
  int jac_index(int a, int t, int tp, int tpp) const { return ((a * T + t) * T + tp) * T + tpp; }

  // out_{p1p2} = sum_{t1',t2'} E[Omega Omega] X_{(a1 t1')(a2 t2')}
  Eigen::MatrixXd contract_omega(const Eigen::MatrixXd& X) const;
  // out_{p1p2} = sum E[J J] X_{(a1 t1')(a2 t2')} Y_{(a1 t1'')(a2 t2'')}
  Eigen::MatrixXd contract_jacobian(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const;
};

AttnMoments attention_moments(const AttnKernel& A, bool masked, long n_samples,
                              std::uint64_t seed, std::uint64_t stream = 0);

// Sum over the (2m-1)!! perfect pairings of prod A[pair]; 0 for odd counts.
double wick_even_moment(const AttnKernel& A, const std::vector<int>& indices);
double wick_even_moment(const Eigen::MatrixXd& A, const std::vector<int>& indices);

}  // namespace wf

#endif  // WIDEFORMER_ATTENTION_HPP_
