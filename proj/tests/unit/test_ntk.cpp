#include <cmath>

#include "doctest.h"
#include "wideformer/lab.hpp"
#include "wideformer/ntk.hpp"

using namespace wf;

namespace {
ArchSpec arch(std::vector<BlockKind> blocks, Activation act = Activation::Gelu) {
  ArchSpec a;
  a.n = 64;
  a.H = 4;
  a.T = 3;
  a.n_in = 12;
  a.n_out = 6;
  a.activation = act;
  a.blocks = std::move(blocks);
  return a;
}
ScalingPlan nt(const ArchSpec& a) {
  return make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
}
}  // namespace

TEST_CASE("ln backward factor") {
  PairKernel G{Eigen::MatrixXd(2, 2), 1, 2, KernelRole::G};
  G.K << 4.0, 1.0, 1.0, 9.0;
  const Eigen::MatrixXd L = ln_backward_factor(G, 0.0);
  CHECK(L(0, 1) == doctest::Approx(1.0 / 6));
  CHECK(L(1, 1) == doctest::Approx(1.0 / 9));
  CHECK(ln_backward_factor(G, 1.0)(0, 0) == doctest::Approx(1.0 / 5));
}

TEST_CASE("per-group decomposition sums to the total") {
  for (auto blocks : {std::vector<BlockKind>{}, std::vector<BlockKind>{BlockKind::MhsaBidirectional, BlockKind::Mlp}}) {
    const ArchSpec a = arch(blocks);
    const Inputs in = make_inputs(a, 2, 5);
    PropagateOptions o;
    o.attention_samples = 4096;
    const NtkTrace t = propagate_ntk(a, nt(a), in, o);
    REQUIRE(t.entries.size() == std::size_t(a.depth() + 2));
    for (const NtkEntry& e : t.entries) {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(e.theta.size(), e.theta.size());
      for (const auto& g : e.by_group)
        if (g.size()) sum += g;
      CHECK((sum - e.theta.K).cwiseAbs().maxCoeff() < 1e-10 * (1 + e.theta.K.cwiseAbs().maxCoeff()));
    }
    // Only groups of this architecture contribute.
    CHECK(t.head().by_group[gi(ParamGroup::WordEmb)].size() == 0);
    if (a.depth() == 0) CHECK(t.head().by_group[gi(ParamGroup::Q)].size() == 0);
  }
}

TEST_CASE("stem ntk") {
  const ArchSpec a = arch({});
  const Inputs in = make_inputs(a, 2, 1);
  const PairKernel G0 = input_kernel(in);
  const PairKernel th = stem_ntk(G0, 2.0, 0.5);
  CHECK(th(0, 1) == doctest::Approx(2 * G0(0, 1)));
  CHECK(th(0, 3) == doctest::Approx(2 * G0(0, 3) + 0.5));
}

// The infinite-width recursion against Monte-Carlo estimates from exact
// Jacobians of finite models.
TEST_CASE("theory agrees with finite-width simulation") {
  for (Activation act : {Activation::Relu, Activation::Gelu}) {
    const ArchSpec a = arch({BlockKind::MhsaBidirectional, BlockKind::Mlp}, act).with_width(128, 4);
    const ScalingPlan p = nt(a);
    const Inputs in = make_inputs(a, 2, 9);
    PropagateOptions o;
    o.attention_samples = 1 << 15;
    const NtkTrace th = propagate_ntk(a, p, in, o);
    McOptions mc;
    mc.n_inits = 48;
    mc.seed = 11;
    const McSummary sim = empirical_ntk(a, p, in, mc);
    const Eigen::MatrixXd& T = th.head().theta.K;
    const double scale = T.cwiseAbs().maxCoeff();
    double worst = 0;
    for (int i = 0; i < T.rows(); ++i)
      for (int j = 0; j < T.cols(); ++j) {
        const double d = std::abs(sim.mean(i, j) - T(i, j));
        worst = std::max(worst, d / (4 * sim.se(i, j) + 12.0 / a.n * scale));
      }
    CHECK(worst <= 1.0);
  }
}

TEST_CASE("ntk csv header") {
  const ArchSpec a = arch({BlockKind::Mlp});
  const std::string csv = ntk_trace_csv(propagate_ntk(a, nt(a), make_inputs(a, 2, 1)));
  CHECK(csv.rfind("block,label,pair1,pair2,theta,group,group_additive\n", 0) == 0);
}
