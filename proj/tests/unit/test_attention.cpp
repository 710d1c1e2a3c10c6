#include <cmath>
#include <random>

#include "doctest.h"
#include "wideformer/attention.hpp"

using namespace wf;

namespace {
Eigen::MatrixXd random_psd(int d, unsigned seed) {
  std::mt19937_64 r(seed);
  std::normal_distribution<double> N;
  Eigen::MatrixXd B(d, d);
  for (int i = 0; i < B.size(); ++i) B.data()[i] = N(r);
  return B * B.transpose() / d;
}
}  // namespace

TEST_CASE("psd square root") {
  const Eigen::MatrixXd A = random_psd(6, 1);
  const Eigen::MatrixXd S = psd_sqrt(A);
  CHECK((S * S.transpose() - A).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(psd_sqrt(Eigen::MatrixXd::Zero(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  // Slightly indefinite input is clipped, not rejected.
  Eigen::MatrixXd B = A;
  B(0, 0) -= 1e-14;
  CHECK_NOTHROW(psd_sqrt(B));
}

TEST_CASE("softmax rows, bidirectional and causal") {
  Eigen::MatrixXd L(3, 3);
  L << 0.1, 2.0, -1.0, 0.5, 0.5, 0.5, 3.0, -2.0, 1.0;
  const Eigen::MatrixXd O = softmax_rows(L, false);
  for (int t = 0; t < 3; ++t) CHECK(O.row(t).sum() == doctest::Approx(1.0));
  CHECK(O(0, 1) == doctest::Approx(std::exp(2.0) / (std::exp(0.1) + std::exp(2.0) + std::exp(-1.0))));
  const Eigen::MatrixXd M = softmax_rows(L, true);
  CHECK(M(0, 0) == 1.0);
  CHECK(M(0, 1) == 0.0);
  CHECK(M(1, 2) == 0.0);
  CHECK(M(1, 0) == doctest::Approx(0.5));
  CHECK(M.row(2).sum() == doctest::Approx(1.0));
}

TEST_CASE("wick pairings") {
  const Eigen::MatrixXd A = random_psd(4, 2);
  CHECK(wick_even_moment(A, {0, 1}) == doctest::Approx(A(0, 1)));
  CHECK(wick_even_moment(A, {0, 1, 2}) == 0.0);
  const double four = A(0, 1) * A(2, 3) + A(0, 2) * A(1, 3) + A(0, 3) * A(1, 2);
  CHECK(wick_even_moment(A, {0, 1, 2, 3}) == doctest::Approx(four));
  CHECK(wick_even_moment(A, {2, 2, 2, 2}) == doctest::Approx(3 * A(2, 2) * A(2, 2)));
  // Six points: 15 pairings; for equal indices 15 A^3.
  CHECK(wick_even_moment(A, {1, 1, 1, 1, 1, 1}) == doctest::Approx(15 * std::pow(A(1, 1), 3)));
}

TEST_CASE("single token attention is trivial") {
  AttnKernel A{Eigen::MatrixXd::Constant(2, 2, 0.7) + Eigen::MatrixXd::Identity(2, 2) * 0.3, 2, 1};
  const AttnMoments m = attention_moments(A, false, 64, 1);
  CHECK(m.omega_omega.cwiseAbs().minCoeff() == doctest::Approx(1.0));
  CHECK(m.jac_jac.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero logits give uniform attention") {
  AttnKernel A{Eigen::MatrixXd::Zero(8, 8), 2, 2};
  const AttnMoments bi = attention_moments(A, false, 32, 1);
  CHECK(bi.omega_omega.maxCoeff() == doctest::Approx(0.25));
  CHECK(bi.omega_omega.minCoeff() == doctest::Approx(0.25));
  const AttnMoments ca = attention_moments(A, true, 32, 1);
  // Token 0 attends only to itself; token 1 splits evenly.
  CHECK(ca.omega_omega(ca.omega_index(0, 0, 0), ca.omega_index(1, 0, 0)) == doctest::Approx(1.0));
  CHECK(ca.omega_omega(ca.omega_index(0, 0, 1), ca.omega_index(0, 0, 1)) == 0.0);
  CHECK(ca.omega_omega(ca.omega_index(0, 1, 0), ca.omega_index(0, 1, 1)) == doctest::Approx(0.25));
}

TEST_CASE("attention moments agree with a direct Monte-Carlo estimate") {
  // Independent estimate: explicit Cholesky draws and per-sample softmax.
  const int S = 1, T = 3, d = S * T * T;
  AttnKernel A{random_psd(d, 5), S, T};
  const long N = 40000;
  const AttnMoments m = attention_moments(A, false, N, 3);
  Eigen::LLT<Eigen::MatrixXd> llt(A.A + 1e-12 * Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd L = llt.matrixL();
  std::mt19937_64 r(99);
  std::normal_distribution<double> Nd;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (long k = 0; k < N; ++k) {
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = Nd(r);
    const Eigen::VectorXd w = L * z;
    Eigen::MatrixXd logits(T, T);
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < T; ++u) logits(t, u) = w(A.index(0, t, u));
    const Eigen::MatrixXd O = softmax_rows(logits, false);
    Eigen::VectorXd o(d);
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < T; ++u) o(A.index(0, t, u)) = O(t, u);
    acc += o * o.transpose();
  }
  acc /= double(N);
  const Eigen::MatrixXd diff = (acc - m.omega_omega).cwiseAbs();
  const Eigen::MatrixXd tol = 6 * std::sqrt(2.0) * m.omega_omega_se;
  CHECK((diff.array() <= tol.array() + 1e-12).all());
}

TEST_CASE("causal moments vanish above the diagonal") {
  const int S = 1, T = 3;
  AttnKernel A{random_psd(S * T * T, 8), S, T};
  const AttnMoments m = attention_moments(A, true, 2048, 1);
  for (int t = 0; t < T; ++t)
    for (int u = t + 1; u < T; ++u) CHECK(m.omega_omega.row(m.omega_index(0, t, u)).cwiseAbs().maxCoeff() == 0.0);
}
