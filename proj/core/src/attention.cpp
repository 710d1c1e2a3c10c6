// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/attention.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>

#include "wideformer/rng.hpp"

namespace wf {

AttnKernel qk_covariance(const PairKernel& F, double C_Q, double C_K) {
  AttnKernel out;
  out.samples = F.samples;
  out.T = F.T;
  const int S = F.samples, T = F.T;
  out.A.resize(out.dim(), out.dim());
  const double c = C_Q * C_K;
  for (int a1 = 0; a1 < S; ++a1)
    for (int t1 = 0; t1 < T; ++t1)
      for (int u1 = 0; u1 < T; ++u1)
        for (int a2 = 0; a2 < S; ++a2)
          for (int t2 = 0; t2 < T; ++t2)
            for (int u2 = 0; u2 < T; ++u2)
              out.A(out.index(a1, t1, u1), out.index(a2, t2, u2)) =
                  c * F(a1 * T + t1, a2 * T + t2) * F(a1 * T + u1, a2 * T + u2);
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A) {
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  const double norm = S.norm();
  if (!std::isfinite(norm)) throw NumericError("attention", "non-finite query-key covariance");
  if (norm == 0.0) return Eigen::MatrixXd::Zero(A.rows(), A.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw NumericError("attention", "eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    // Rounding can push zero modes slightly negative; clip them up.
    lam(i) = std::sqrt(std::max(lam(i), 1e-12 * norm));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits, bool masked) {
  const Eigen::Index T = logits.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index end = masked ? t + 1 : T;
    double mx = logits(t, 0);
    for (Eigen::Index u = 1; u < end; ++u) mx = std::max(mx, logits(t, u));
    double z = 0;
    for (Eigen::Index u = 0; u < end; ++u) z += (out(t, u) = std::exp(logits(t, u) - mx));
    for (Eigen::Index u = 0; u < end; ++u) out(t, u) /= z;
  }
  return out;
}

namespace {

// Sum and sum-of-squares accumulators for outer products of draw vectors.
struct OuterAccumulator {
  Eigen::MatrixXd sum, sumsq;
  explicit OuterAccumulator(Eigen::Index d) : sum(Eigen::MatrixXd::Zero(d, d)), sumsq(sum) {}
  void add(const Eigen::MatrixXd& batch) {  // rows = draws
    sum.noalias() += batch.transpose() * batch;
    const Eigen::MatrixXd sq = batch.array().square().matrix();
    sumsq.noalias() += sq.transpose() * sq;
  }
  void finish(long n, Eigen::MatrixXd& mean, Eigen::MatrixXd& se) const {
    mean = sum / double(n);
    Eigen::MatrixXd var = (sumsq / double(n) - mean.array().square().matrix()) * (double(n) / (n - 1));
    se = (var.array().max(0.0) / double(n)).sqrt().matrix();
  }
};

}  // namespace

AttnMoments attention_moments(const AttnKernel& A, bool masked, long n_samples,
                              std::uint64_t seed, std::uint64_t stream) {
  if (n_samples < 2) throw InputError("attention_moments needs at least 2 samples");
  const int S = A.samples, T = A.T, d = A.dim();
  const long jd = long(S) * T * T * T;
  if (jd > 4096) throw InputError("attention moment tensor too large (|D|*T^3 > 4096)");
  const Eigen::MatrixXd L = psd_sqrt(A.A);

  AttnMoments m;
  m.samples = S;
  m.T = T;
  m.masked = masked;
  m.n_samples = n_samples;
  OuterAccumulator om(d), jj(jd);

  constexpr long kChunk = 256;
  for (long start = 0, chunk = 0; start < n_samples; start += kChunk, ++chunk) {
    const long rows = std::min(kChunk, n_samples - start);
    auto gen = rng_stream(seed, Purpose::Attention, (stream << 32) | std::uint64_t(chunk));
    std::normal_distribution<double> normal;
    Eigen::MatrixXd Z(d, rows);
    for (long r = 0; r < rows; ++r)
      for (int i = 0; i < d; ++i) Z(i, r) = normal(gen);
    const Eigen::MatrixXd Wt = L * Z;  // d x rows
    Eigen::MatrixXd ob(rows, d), jb(rows, jd);
    for (long r = 0; r < rows; ++r) {
      for (int a = 0; a < S; ++a) {
        Eigen::MatrixXd logits(T, T);
        for (int t = 0; t < T; ++t)
          for (int u = 0; u < T; ++u) logits(t, u) = Wt(A.index(a, t, u), r);
        const Eigen::MatrixXd om_a = softmax_rows(logits, masked);
        for (int t = 0; t < T; ++t)
          for (int u = 0; u < T; ++u) {
            ob(r, m.omega_index(a, t, u)) = om_a(t, u);
            for (int v = 0; v < T; ++v)
              jb(r, m.jac_index(a, t, u, v)) = om_a(t, u) * ((u == v ? 1.0 : 0.0) - om_a(t, v));
          }
      }
    }
    om.add(ob);
    jj.add(jb);
  }
  om.finish(n_samples, m.omega_omega, m.omega_omega_se);
  jj.finish(n_samples, m.jac_jac, m.jac_jac_se);
  return m;
}

Eigen::MatrixXd AttnMoments::contract_omega(const Eigen::MatrixXd& X) const {
  if (omega_omega.size() == 0) throw InputError("attention moments missing");
  const int P = samples * T;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(P, P);
  for (int a1 = 0; a1 < samples; ++a1)
    for (int t1 = 0; t1 < T; ++t1)
      for (int a2 = 0; a2 < samples; ++a2)
        for (int t2 = 0; t2 < T; ++t2) {
          const int p1 = a1 * T + t1, p2 = a2 * T + t2;
          if (p2 < p1) continue;
          double acc = 0;
          for (int u1 = 0; u1 < T; ++u1)
            for (int u2 = 0; u2 < T; ++u2)
              acc += omega_omega(omega_index(a1, t1, u1), omega_index(a2, t2, u2)) *
                     X(a1 * T + u1, a2 * T + u2);
          out(p1, p2) = acc;
        }
  mirror_upper(out);
  return out;
}

Eigen::MatrixXd AttnMoments::contract_jacobian(const Eigen::MatrixXd& X,
                                               const Eigen::MatrixXd& Y) const {
  if (jac_jac.size() == 0) throw InputError("attention derivative moments missing");
  const int P = samples * T;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(P, P);
  for (int a1 = 0; a1 < samples; ++a1)
    for (int t1 = 0; t1 < T; ++t1)
      for (int a2 = 0; a2 < samples; ++a2)
        for (int t2 = 0; t2 < T; ++t2) {
          const int p1 = a1 * T + t1, p2 = a2 * T + t2;
          if (p2 < p1) continue;
          double acc = 0;
          for (int u1 = 0; u1 < T; ++u1)
            for (int v1 = 0; v1 < T; ++v1) {
              const int i1 = jac_index(a1, t1, u1, v1);
              for (int u2 = 0; u2 < T; ++u2) {
                const double x = X(a1 * T + u1, a2 * T + u2);
                for (int v2 = 0; v2 < T; ++v2)
                  acc += jac_jac(i1, jac_index(a2, t2, u2, v2)) * x * Y(a1 * T + v1, a2 * T + v2);
              }
            }
          out(p1, p2) = acc;
        }
  mirror_upper(out);
  return out;
}

double wick_even_moment(const Eigen::MatrixXd& A, const std::vector<int>& indices) {
  if (indices.size() % 2 == 1) return 0.0;
  if (indices.empty()) return 1.0;
  // Pair the first index with each other one and recurse.
  std::function<double(std::vector<int>&)> rec = [&](std::vector<int>& idx) -> double {
    if (idx.empty()) return 1.0;
    const int first = idx.front();
    double total = 0;
    for (std::size_t j = 1; j < idx.size(); ++j) {
      const double a = A(first, idx[j]);
      std::vector<int> rest;
      rest.reserve(idx.size() - 2);
      for (std::size_t k = 1; k < idx.size(); ++k)
        if (k != j) rest.push_back(idx[k]);
      total += a * rec(rest);
    }
    return total;
  };
  std::vector<int> idx = indices;
  return rec(idx);
}

double wick_even_moment(const AttnKernel& A, const std::vector<int>& indices) {
  return wick_even_moment(A.A, indices);
}

}  // namespace wf
