#include <cmath>

#include "doctest.h"
#include "wideformer/transformer.hpp"

using namespace wf;

namespace {
ArchSpec vision() {
  ArchSpec a;
  a.n = 16;
  a.H = 2;
  a.T = 4;
  a.n_in = 6;
  a.n_out = 3;
  return a;
}
ArchSpec language(bool tied) {
  ArchSpec a = vision();
  a.modality = Modality::Language;
  a.n_in = 10;
  a.weight_tying = tied;
  a.blocks = {BlockKind::MhsaMasked, BlockKind::Mlp};
  return a;
}
ScalingPlan nt(const ArchSpec& a) {
  return make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
}
// Central-difference gradient of f[alpha](t, i) w.r.t. every entry.
double fd_error(const ArchSpec& a) {
  const ScalingPlan p = nt(a);
  ModelParams m = init_model(a, p, 17);
  m.head_b.setConstant(0.1);
  const Inputs in = make_inputs(a, 2, 3);
  const OutputIndex out{1, 2, 1};
  const ModelParams g = output_jacobian(m, in, {out})[0];
  std::vector<Eigen::MatrixXd> grads;
  g.for_each([&](ParamGroup, Eigen::Ref<const Eigen::MatrixXd> x) { grads.emplace_back(x); });
  double worst = 0, scale = 0;
  std::size_t k = 0;
  const double h = 1e-6;
  m.for_each([&](ParamGroup, Eigen::Ref<Eigen::MatrixXd> x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      x.data()[i] = v + h;
      const double fp = forward_sample(m, in, 1).f(2, 1);
      x.data()[i] = v - h;
      const double fm = forward_sample(m, in, 1).f(2, 1);
      x.data()[i] = v;
      worst = std::max(worst, std::abs((fp - fm) / (2 * h) - grads[k].data()[i]));
      scale = std::max(scale, std::abs(grads[k].data()[i]));
    }
    ++k;
  });
  return worst / scale;
}
}  // namespace

TEST_CASE("init variances match the plan") {
  ArchSpec a = vision();
  a.n = 128;
  a.H = 4;
  const ScalingPlan p = nt(a);
  const ModelParams m = init_model(a, p, 5);
  m.for_each([&](ParamGroup g, Eigen::Ref<const Eigen::MatrixXd> x) {
    const double var = x.squaredNorm() / double(x.size());
    const double want = p.init_var(g);
    if (want == 0) {
      CHECK(x.cwiseAbs().maxCoeff() == 0.0);
    } else {
      INFO(to_string(g));
      CHECK(var == doctest::Approx(want).epsilon(6.0 / std::sqrt(double(x.size()))));
    }
  });
  const ModelParams u = init_model(a, p, 5, Distribution::Uniform);
  CHECK(u.blocks[0].Q.cwiseAbs().maxCoeff() <= std::sqrt(3 * p.init_var(ParamGroup::Q)) + 1e-15);
}

TEST_CASE("same seed, same model; zeros_like keeps shapes") {
  const ArchSpec a = vision();
  const ModelParams m1 = init_model(a, nt(a), 9), m2 = init_model(a, nt(a), 9);
  CHECK(m1.blocks[1].W == m2.blocks[1].W);
  const ModelParams z = m1.zeros_like();
  CHECK(z.blocks[1].W.rows() == a.M * a.n);
  CHECK(z.blocks[1].W.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("layer norm rows") {
  Eigen::MatrixXd z(2, 4);
  z << 1, 2, 3, 4, -1, 0, 0, 5;
  Eigen::VectorXd inv;
  const Eigen::MatrixXd s = layer_norm_rows(z, 0.0, inv);
  for (int r = 0; r < 2; ++r) {
    CHECK(std::abs(s.row(r).mean()) < 1e-14);
    CHECK(s.row(r).squaredNorm() / 4 == doctest::Approx(1.0));
  }
  CHECK(inv(0) == doctest::Approx(1.0 / std::sqrt(1.25)));
}

TEST_CASE("jacobian matches finite differences") {
  CHECK(fd_error(vision()) < 1e-6);
  CHECK(fd_error(language(true)) < 1e-6);
  CHECK(fd_error(language(false)) < 1e-6);
}

TEST_CASE("masked attention is causal") {
  const ArchSpec a = language(true);
  const ModelParams m = init_model(a, nt(a), 2);
  Inputs in = make_inputs(a, 1, 4);
  const Eigen::MatrixXd f0 = forward_sample(m, in, 0).f;
  in.tokens[0][3] = (in.tokens[0][3] + 1) % a.n_in;
  const Eigen::MatrixXd f1 = forward_sample(m, in, 0).f;
  CHECK((f0.topRows(3) - f1.topRows(3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f0.row(3) - f1.row(3)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("pooled output is the token mean") {
  ArchSpec a = vision();
  a.pooling = Pooling::TokenMean;
  const ModelParams m = init_model(a, nt(a), 4);
  const SampleTrace t = forward_sample(m, make_inputs(a, 1, 1), 0);
  CHECK((t.pooled - t.f.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("vjp equals the weighted sum of output jacobians") {
  const ArchSpec a = vision();
  const ModelParams m = init_model(a, nt(a), 8);
  const Inputs in = make_inputs(a, 2, 2);
  std::vector<Eigen::MatrixXd> cot(2, Eigen::MatrixXd::Zero(a.T, a.n_out));
  cot[0](1, 2) = 0.5;
  cot[1](3, 0) = -2.0;
  const ModelParams v = vjp(m, in, cot);
  const auto J = output_jacobian(m, in, {{0, 1, 2}, {1, 3, 0}});
  CHECK((v.blocks[0].Q - (0.5 * J[0].blocks[0].Q - 2.0 * J[1].blocks[0].Q)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((v.embed - (0.5 * J[0].embed - 2.0 * J[1].embed)).cwiseAbs().maxCoeff() < 1e-12);
}
