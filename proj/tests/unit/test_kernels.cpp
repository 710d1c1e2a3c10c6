#include <cmath>

#include "doctest.h"
#include "wideformer/kernels.hpp"

using namespace wf;

namespace {
PairKernel sample_G() {
  Eigen::MatrixXd K(4, 4);
  K << 1.2, 0.3, 0.1, -0.2, 0.3, 0.9, 0.05, 0.0, 0.1, 0.05, 1.5, 0.4, -0.2, 0.0, 0.4, 0.8;
  return {K, 2, 2, KernelRole::G};
}
double arccos1(double k11, double k12, double k22) {
  const double r = std::sqrt(k11 * k22);
  const double th = std::acos(std::clamp(k12 / r, -1.0, 1.0));
  return r / (2 * M_PI) * (std::sin(th) + (M_PI - th) * std::cos(th));
}
ArchSpec small(int depth_blocks, Activation act) {
  ArchSpec a;
  a.n = 64;
  a.T = 3;
  a.activation = act;
  a.blocks.clear();
  for (int b = 0; b < depth_blocks; ++b) a.blocks.push_back(b % 2 ? BlockKind::Mlp : BlockKind::MhsaBidirectional);
  return a;
}
}  // namespace

TEST_CASE("input and stem kernels") {
  Inputs in;
  in.modality = Modality::Vision;
  Eigen::MatrixXd x0(2, 3), x1(2, 3);
  x0 << 1, 0, 2, 0, 1, 1;
  x1 << 1, 1, 1, -1, 0, 0;
  in.patches = {x0, x1};
  const PairKernel G0 = input_kernel(in);
  CHECK(G0(0, 0) == doctest::Approx(5.0 / 3));
  CHECK(G0(0, 2) == doctest::Approx(3.0 / 3));
  CHECK(G0(1, 3) == doctest::Approx(0.0));
  const PairKernel G1 = stem_kernel(G0, 2.0, 0.1);
  CHECK(G1(0, 0) == doctest::Approx(2 * 5.0 / 3 + 0.1));
  CHECK(G1(0, 2) == doctest::Approx(2.0 + 0.1));  // same token position, different samples
  CHECK(G1(0, 1) == doctest::Approx(2 * G0(0, 1)));

  Inputs tok;
  tok.modality = Modality::Language;
  tok.tokens = {{3, 5}, {5, 7}};
  const PairKernel Gt = input_kernel(tok);
  CHECK(Gt(1, 2) == 1.0);
  CHECK(Gt(0, 1) == 0.0);
}

TEST_CASE("layer-norm kernel normalizes the diagonal") {
  const PairKernel G = sample_G();
  const PairKernel F = layer_norm_kernel(G, 0.0);
  for (int p = 0; p < 4; ++p) CHECK(F(p, p) == doctest::Approx(1.0));
  CHECK(F(0, 1) == doctest::Approx(0.3 / std::sqrt(1.2 * 0.9)));
  const PairKernel Fe = layer_norm_kernel(G, 0.5);
  CHECK(Fe(0, 1) == doctest::Approx(0.3 / std::sqrt(1.7 * 1.4)));
}

TEST_CASE("mlp step: identity and relu closed forms") {
  const PairKernel G = sample_G();
  const PairKernel F = layer_norm_kernel(G, 0.0);
  const PairKernel Gi = mlp_kernel_step(G, F, 0.4, 1.6, Activation::Identity);
  CHECK(Gi(0, 1) == doctest::Approx(G(0, 1) + 0.4 * 1.6 * F(0, 1)));
  const PairKernel Gr = mlp_kernel_step(G, F, 0.4, 1.6, Activation::Relu);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q)
      // Quadrature converges slowly across the ReLU kink.
      CHECK(std::abs(Gr(p, q) - G(p, q) - 1.6 * arccos1(0.4 * F(p, p), 0.4 * F(p, q), 0.4 * F(q, q))) < 3e-3);
}

TEST_CASE("mhsa step with one token adds C_U C_V F") {
  PairKernel G{Eigen::MatrixXd(2, 2), 2, 1, KernelRole::G};
  G.K << 1.0, 0.3, 0.3, 1.4;
  const PairKernel F = layer_norm_kernel(G, 0.0);
  const AttnMoments m = attention_moments(qk_covariance(F, 0.5, 0.5), false, 64, 1);
  const PairKernel G1 = mhsa_kernel_step(G, F, 1.0 / 3, 0.5, m);
  CHECK(G1(0, 1) == doctest::Approx(0.3 + F(0, 1) / 6));
}

TEST_CASE("depth-4 diagonals are nondecreasing") {
  for (Activation act : {Activation::Relu, Activation::Identity}) {
    const ArchSpec a = small(4, act);
    const Inputs in = make_inputs(a, 2, 4);
    const KernelTrace kt = propagate_kernels(a, make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent)), in);
    REQUIRE(kt.entries.size() == 7);  // input, stem, 4 blocks, head
    for (int b = 2; b <= 5; ++b)
      for (int p = 0; p < kt.entries[b].G.size(); ++p) CHECK(kt.entries[b].G(p, p) >= kt.entries[b - 1].G(p, p));
  }
}

TEST_CASE("trace layout and depth zero") {
  ArchSpec a = small(1, Activation::Gelu);
  const Inputs in = make_inputs(a, 2, 4);
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  const KernelTrace kt = propagate_kernels(a, p, in);
  CHECK(kt.entries.size() == 4);
  CHECK(kt.entries[2].label == "block1:mhsa");
  a.blocks.clear();
  const KernelTrace k0 = propagate_kernels(a, make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent)), in);
  CHECK(k0.entries.size() == 3);
  // Head kernel of a depth-0 model is C_head times the stem LN kernel.
  CHECK(k0.head().G(0, 1) == doctest::Approx((*k0.entries[1].F)(0, 1)));
}

TEST_CASE("causal and bidirectional attention give different traces") {
  ArchSpec a = small(1, Activation::Gelu);
  const Inputs in = make_inputs(a, 2, 4);
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  const KernelTrace bi = propagate_kernels(a, p, in);
  a.blocks = {BlockKind::MhsaMasked};
  const KernelTrace ca = propagate_kernels(a, p, in);
  CHECK((bi.entries[2].G.K - ca.entries[2].G.K).cwiseAbs().maxCoeff() > 1e-3);
  CHECK((bi.entries[2].moments->omega_omega - ca.entries[2].moments->omega_omega).cwiseAbs().maxCoeff() > 1e-2);
}

TEST_CASE("token-mean pooling averages token blocks") {
  const PairKernel G = sample_G();
  const Eigen::MatrixXd P = pool_tokens(G);
  CHECK(P(0, 1) == doctest::Approx((0.1 - 0.2 + 0.05 + 0.0) / 4));
  const HeadKernel h = head_kernel(G, 2.0, Pooling::TokenMean);
  CHECK(h.pooled(0, 0) == doctest::Approx(2 * (1.2 + 0.3 + 0.3 + 0.9) / 4));
}

TEST_CASE("kernel csv has the documented columns") {
  const ArchSpec a = small(2, Activation::Gelu);
  const Inputs in = make_inputs(a, 2, 4);
  const std::string csv = kernel_trace_csv(propagate_kernels(a, make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent)), in));
  CHECK(csv.rfind("block,label,pair1,pair2,G,F\n", 0) == 0);
}
