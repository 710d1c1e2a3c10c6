// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Gaussian pair integrals <f(w1) g(w2)> under a 2x2 mean-zero covariance.

#ifndef WIDEFORMER_GAUSSIAN_HPP_
#define WIDEFORMER_GAUSSIAN_HPP_

#include <vector>

#include "wideformer/activation.hpp"

namespace wf {

inline constexpr int kDefaultQuadratureOrder = 64;

// Probabilists' Gauss-Hermite rule normalized to the standard normal:
// E[h(x)] ~= sum_i weights[i] h(nodes[i]).  Cached per order.
struct HermiteRule {
  std::vector<double> nodes, weights;
};
const HermiteRule& hermite_rule(int order);

// Tensor-product quadrature estimate of E[f(w1) g(w2)],
// (w1, w2) ~ N(0, [[K11, K12], [K12, K22]]).  Perfectly correlated entries
// (including diagonal ones) reduce to a one-dimensional rule.
double gauss_pair_expect(const ActFn& f, const ActFn& g, double K11, double K12, double K22,
                         int order = kDefaultQuadratureOrder);

}  // namespace wf

#endif  // WIDEFORMER_GAUSSIAN_HPP_
