#include <cmath>

#include "doctest.h"
#include "wideformer/lab.hpp"

using namespace wf;

namespace {
ArchSpec small() {
  ArchSpec a;
  a.n = 64;
  a.H = 4;
  a.T = 3;
  a.n_in = 12;
  a.n_out = 6;
  a.blocks = {BlockKind::MhsaBidirectional, BlockKind::Mlp};
  return a;
}
ScalingPlan nt(const ArchSpec& a) {
  return make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
}
}  // namespace

TEST_CASE("running statistics") {
  MatrixStat m;
  for (double v : {1.0, 2.0, 3.0, 6.0}) m.add(Eigen::MatrixXd::Constant(1, 2, v));
  CHECK(m.mean()(0, 1) == doctest::Approx(3.0));
  // sample sd = sqrt(14/3), se = sd / 2
  CHECK(m.se()(0, 0) == doctest::Approx(std::sqrt(14.0 / 3) / 2));
  MatrixStat one;
  one.add(Eigen::MatrixXd::Ones(1, 1));
  CHECK(std::isinf(one.se()(0, 0)));
  ScalarStat s;
  for (double v : {1.0, 2.0, 3.0, 6.0}) s.add(v);
  CHECK(s.mean() == 3.0);
  CHECK(s.se() == doctest::Approx(std::sqrt(14.0 / 3) / 2));
}

TEST_CASE("empirical kernels match the theory at moderate width") {
  const ArchSpec a = small().with_width(128, 4);
  const ScalingPlan p = nt(a);
  const Inputs in = make_inputs(a, 2, 3);
  PropagateOptions o;
  o.attention_samples = 1 << 15;
  const KernelTrace kt = propagate_kernels(a, p, in, o);
  McOptions mc;
  mc.n_inits = 64;
  const auto sim = empirical_kernel(a, p, in, mc);
  REQUIRE(sim.size() >= 4);
  for (int b = 0; b < 4; ++b) {
    const Eigen::MatrixXd& th = kt.entries[1 + b].G.K;
    const double tol = 5.0;
    for (int i = 0; i < th.rows(); ++i)
      for (int j = 0; j < th.cols(); ++j) {
        const double z = std::abs(sim[b].mean(i, j) - th(i, j)) / (sim[b].se(i, j) + 8.0 / a.n * std::abs(th(i, j)) + 1e-12);
        INFO(sim[b].label, " ", i, " ", j);
        CHECK(z < tol);
      }
  }
}

TEST_CASE("layer norm forward is exact at eps = 0") {
  const ArchSpec a = small();
  McOptions mc;
  mc.n_inits = 4;
  const LnStats s = ln_backward_stats(a, nt(a), make_inputs(a, 2, 1), 0, mc);
  CHECK(s.max_norm_error < 1e-12);
  CHECK(s.factor.n_inits == 4);
}

TEST_CASE("gradient and probe statistics are finite and positive") {
  const ArchSpec a = small();
  const ScalingPlan p = nt(a);
  const Inputs in = make_inputs(a, 2, 1);
  McOptions mc;
  mc.n_inits = 4;
  const auto g = grad_magnitude_stats(a, p, in, mc);
  CHECK(g.size() == a.groups().size());
  for (const auto& s : g) {
    INFO(to_string(s.group));
    CHECK(std::isfinite(s.mean_abs));
    CHECK(s.mean_abs > 0);
  }
  for (Optimizer opt : {Optimizer::Sgd, Optimizer::AdamW}) {
    ProbeOptions po;
    po.optimizer = opt;
    const ProbeStat ps = one_step_probe(a, p, in, po, mc);
    CHECK(ps.mean_abs_df_over_lr > 0);
    CHECK(std::isfinite(ps.se));
  }
}

TEST_CASE("results do not depend on the thread count") {
  const ArchSpec a = small();
  const ScalingPlan p = nt(a);
  const Inputs in = make_inputs(a, 2, 1);
  McOptions mc;
  mc.n_inits = 6;
  const McSummary r1 = empirical_ntk(a, p, in, mc);
  const McSummary r2 = empirical_ntk(a, p, in, mc);
  CHECK(r1.mean == r2.mean);
}
