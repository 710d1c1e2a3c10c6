#include <cmath>

#include "doctest.h"
#include "wideformer/gaussian.hpp"

using namespace wf;

namespace {
// Arc-cosine kernel of degree one: E[relu(u) relu(v)].
double arccos1(double k11, double k12, double k22) {
  const double r = std::sqrt(k11 * k22);
  const double th = std::acos(std::clamp(k12 / r, -1.0, 1.0));
  return r / (2 * M_PI) * (std::sin(th) + (M_PI - th) * std::cos(th));
}
// E[h(sqrt(k) x)] by composite Simpson on [-12, 12].
template <typename H>
double simpson1(H&& h, double k) {
  const int m = 20000;
  const double a = -12, b = 12, dx = (b - a) / m;
  double s = 0;
  for (int i = 0; i <= m; ++i) {
    const double x = a + i * dx;
    const double w = (i == 0 || i == m) ? 1 : (i % 2 ? 4 : 2);
    s += w * h(std::sqrt(k) * x) * std::exp(-x * x / 2);
  }
  return s * dx / 3 / std::sqrt(2 * M_PI);
}
}  // namespace

TEST_CASE("hermite rule integrates Gaussian moments") {
  for (int order : {8, 32, 64}) {
    const HermiteRule& r = hermite_rule(order);
    double s0 = 0, s2 = 0, s4 = 0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      s0 += r.weights[i];
      s2 += r.weights[i] * r.nodes[i] * r.nodes[i];
      s4 += r.weights[i] * std::pow(r.nodes[i], 4);
    }
    CHECK(s0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s4 == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("identity activation gives the covariance exactly") {
  const ActFn id{Activation::Identity, false};
  CHECK(gauss_pair_expect(id, id, 1.3, 0.4, 0.9) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(gauss_pair_expect(id, id, 2.0, 2.0, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("relu matches the arc-cosine closed form") {
  const ActFn relu{Activation::Relu, false};
  struct C { double a, b, c; };
  for (C k : {C{1, 0.3, 1}, C{2.0, -0.5, 0.7}, C{1, 0.99, 1}, C{1.5, 0.0, 0.5}}) {
    const double q = gauss_pair_expect(relu, relu, k.a, k.b, k.c, 64);
    CHECK(q == doctest::Approx(arccos1(k.a, k.b, k.c)).epsilon(2e-3));
  }
  // Perfect correlation is exact: E[relu(x)^2] = K/2.
  CHECK(gauss_pair_expect(relu, relu, 1.7, 1.7, 1.7) == doctest::Approx(0.85).epsilon(1e-10));
}

TEST_CASE("gelu second moment matches direct integration") {
  const ActFn gelu{Activation::Gelu, false};
  for (double k : {0.3, 1.0, 2.5}) {
    const double ref = simpson1([](double x) { return std::pow(activate(Activation::Gelu, x), 2); }, k);
    CHECK(gauss_pair_expect(gelu, gelu, k, k, k) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("activation derivatives match finite differences") {
  for (Activation a : {Activation::Gelu, Activation::Tanh, Activation::Identity}) {
    for (double x : {-2.1, -0.3, 0.4, 1.7}) {
      const double h = 1e-6;
      const double fd = (activate(a, x + h) - activate(a, x - h)) / (2 * h);
      CHECK(activate_deriv(a, x) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("invalid covariances are rejected") {
  const ActFn id{Activation::Identity, false};
  CHECK_THROWS(gauss_pair_expect(id, id, -1.0, 0.0, 1.0));
  CHECK_THROWS(gauss_pair_expect(id, id, 1.0, 2.0, 1.0));
}
