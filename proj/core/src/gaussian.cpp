// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace wf {

const HermiteRule& hermite_rule(int order) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<HermiteRule>> cache;
  if (order < 1) throw InputError("quadrature order must be positive");
  std::lock_guard lock(mu);
  auto& slot = cache[order];
  if (!slot) {
    // Golub-Welsch: Jacobi matrix of the monic probabilists' Hermite
    // polynomials has zero diagonal and off-diagonal sqrt(k).
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    auto rule = std::make_unique<HermiteRule>();
    rule->nodes.resize(order);
    rule->weights.resize(order);
    double total = 0;
    for (int i = 0; i < order; ++i) {
      rule->nodes[i] = es.eigenvalues()(i);
      const double v = es.eigenvectors()(0, i);
      rule->weights[i] = v * v;
      total += v * v;
    }
    for (double& w : rule->weights) w /= total;
    // Symmetrize nodes exactly so odd moments vanish to rounding.
    for (int i = 0; i < order / 2; ++i) {
      const double x = 0.5 * (rule->nodes[order - 1 - i] - rule->nodes[i]);
      const double w = 0.5 * (rule->weights[i] + rule->weights[order - 1 - i]);
      rule->nodes[i] = -x;
      rule->nodes[order - 1 - i] = x;
      rule->weights[i] = rule->weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) rule->nodes[order / 2] = 0.0;
    slot = std::move(rule);
  }
  return *slot;
}

double gauss_pair_expect(const ActFn& f, const ActFn& g, double K11, double K12, double K22,
                         int order) {
  const double tol = 1e-12 * std::max({1.0, std::abs(K11), std::abs(K22)});
  if (!(K11 >= -tol) || !(K22 >= -tol) || !std::isfinite(K12))
    throw InputError("gauss_pair_expect: negative variance");
  K11 = std::max(K11, 0.0);
  K22 = std::max(K22, 0.0);
  const double s1 = std::sqrt(K11), s2 = std::sqrt(K22);
  if (std::abs(K12) > s1 * s2 * (1.0 + 1e-10) + tol)
    throw InputError("gauss_pair_expect: |K12| exceeds sqrt(K11 K22)");
  const HermiteRule& r = hermite_rule(order);
  const double rho = (s1 > 0 && s2 > 0) ? std::clamp(K12 / (s1 * s2), -1.0, 1.0) : 0.0;
  const double residual = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  if (residual == 0.0 || s2 == 0.0 || s1 == 0.0) {
    double acc = 0;
    for (int i = 0; i < order; ++i) {
      const double x = r.nodes[i];
      acc += r.weights[i] * f(s1 * x) * g(s2 * rho * x);
    }
    // Independent factors when one side is degenerate.
    if (s1 == 0.0 || s2 == 0.0) {
      double a = 0, b = 0;
      for (int i = 0; i < order; ++i) {
        a += r.weights[i] * f(s1 * r.nodes[i]);
        b += r.weights[i] * g(s2 * r.nodes[i]);
      }
      return a * b;
    }
    return acc;
  }
  double acc = 0;
  for (int i = 0; i < order; ++i) {
    const double x1 = r.nodes[i];
    const double fv = f(s1 * x1);
    if (fv == 0.0) continue;
    double inner = 0;
    for (int j = 0; j < order; ++j)
      inner += r.weights[j] * g(s2 * (rho * x1 + residual * r.nodes[j]));
    acc += r.weights[i] * fv * inner;
  }
  return acc;
}

}  // namespace wf
