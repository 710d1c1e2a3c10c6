#include <cmath>

#include "doctest.h"
#include "wideformer/plan.hpp"

using namespace wf;
using G = ParamGroup;

namespace {
ArchSpec vision(int n) {
  ArchSpec a;
  a.n = n;
  a.H = 4;
  a.M = 4;
  a.n_in = 48;
  a.n_out = 10;
  return a;
}
ArchSpec language(int n) {
  ArchSpec a;
  a.modality = Modality::Language;
  a.n = n;
  a.H = 4;
  a.n_in = 100;
  a.weight_tying = true;
  a.blocks = {BlockKind::MhsaMasked, BlockKind::Mlp};
  return a;
}
}  // namespace

TEST_CASE("neural-tangent init variances follow fan-in") {
  const ArchSpec a = vision(256);
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  CHECK(p.init_var(G::Patch) == doctest::Approx(1.0 / 48));
  CHECK(p.init_var(G::PosEmb) == doctest::Approx(0.0004));
  CHECK(p.init_var(G::Q) == doctest::Approx(0.5 / 256));
  CHECK(p.init_var(G::U) == doctest::Approx(1.0 / 3 / 256));
  CHECK(p.init_var(G::W) == doctest::Approx(0.4 / 256));
  CHECK(p.init_var(G::X) == doctest::Approx(1.6 / (4 * 256)));
  CHECK(p.init_var(G::HeadW) == doctest::Approx(1.0 / 256));
  CHECK(p.init_var(G::HeadB) == 0.0);
  CHECK(p.rescale() == 1.0);
}

TEST_CASE("sgd factors divide by fan and scale the body by n^s") {
  const ArchSpec a = vision(256);
  const ScalingPlan nt = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  CHECK(nt.sgd(G::Patch) == doctest::Approx(1.0 / 48));
  CHECK(nt.sgd(G::PosEmb) == doctest::Approx(1.0));
  CHECK(nt.sgd(G::Q) == doctest::Approx(1.0 / 256));
  CHECK(nt.sgd(G::X) == doctest::Approx(1.0 / (4 * 256)));
  CHECK(nt.sgd(G::HeadW) == doctest::Approx(1.0 / 256));
  CHECK(nt.sgd(G::HeadB) == doctest::Approx(1.0));
  const ScalingPlan mu = make_plan(a, ScalingStrategy::from_preset(Preset::MaximalUpdate));
  CHECK(mu.sgd(G::Q) == doctest::Approx(1.0));
  CHECK(mu.sgd(G::PosEmb) == doctest::Approx(256.0));
  CHECK(mu.sgd(G::HeadW) == doctest::Approx(1.0 / 256));
  CHECK(mu.init_var(G::HeadW) == doctest::Approx(1.0 / (256.0 * 256.0)));
}

TEST_CASE("adamw factors at n = 768 with the MLP multiplier ignored") {
  ArchSpec a = vision(768);
  a.H = 12;
  a.n_in = 768;
  a.n_out = 1000;
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent, true));
  const double n = 768;
  CHECK(p.adamw(G::Patch) == doctest::Approx(1.0 / (768 * std::sqrt(n))));
  CHECK(p.adamw(G::PosEmb) == doctest::Approx(1.0 / std::sqrt(n)));
  CHECK(p.adamw(G::W) == doctest::Approx(std::pow(n, -1.5)));
  CHECK(p.adamw(G::X) == doctest::Approx(std::pow(n, -1.5)));
  CHECK(p.adamw(G::HeadW) == doctest::Approx(1.0 / (n * std::sqrt(1000.0))));
  CHECK(p.adamw(G::HeadB) == doctest::Approx(1.0 / std::sqrt(1000.0)));
  // Keeping M: W gets M^{-1/2}, X gets M^{-1}.
  const ScalingPlan pm = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent, false));
  CHECK(pm.adamw(G::W) == doctest::Approx(std::pow(n, -1.5) / 2));
  CHECK(pm.adamw(G::X) == doctest::Approx(std::pow(n, -1.5) / 4));
}

TEST_CASE("standard preset uses uniform factors") {
  const ScalingPlan p = make_plan(language(64), ScalingStrategy::from_preset(Preset::Standard));
  for (ParamGroup g : kAllGroups) {
    CHECK(p.sgd(g) == 1.0);
    CHECK(p.adamw(g) == 1.0);
  }
  CHECK(p.rescale() == 1.0);
  CHECK(p.init_var(G::WordEmb) == doctest::Approx(0.0004));
}

TEST_CASE("tied language head is rescaled by n^{-(1+s)/2}") {
  const ScalingPlan nt = make_plan(language(64), ScalingStrategy::from_preset(Preset::NeuralTangent));
  CHECK(nt.rescale() == doctest::Approx(1.0 / 8));
  CHECK(nt.init_var(G::WordEmb) == 1.0);
  const ScalingPlan mu = make_plan(language(64), ScalingStrategy::from_preset(Preset::MaximalUpdate));
  CHECK(mu.rescale() == doctest::Approx(1.0 / 64));
  ArchSpec untied = language(64);
  untied.weight_tying = false;
  CHECK(make_plan(untied, ScalingStrategy::from_preset(Preset::NeuralTangent)).rescale() == 1.0);
}

TEST_CASE("plan JSON round-trips bit-exactly") {
  for (Preset pr : {Preset::Standard, Preset::NeuralTangent, Preset::Hybrid, Preset::MaximalUpdate}) {
    const ScalingPlan p = make_plan(language(96), ScalingStrategy::from_preset(pr));
    const std::string js = plan_to_json(p);
    const ScalingPlan q = plan_from_json(js);
    CHECK(q == p);
    CHECK(plan_to_json(q) == js);
  }
  const ScalingPlan c = make_plan(vision(64), ScalingStrategy::custom(0.3));
  CHECK(plan_from_json(plan_to_json(c)) == c);
}

TEST_CASE("rendered table rows") {
  ArchSpec a = vision(768);
  a.H = 12;
  a.n_in = 768;
  a.n_out = 1000;
  const std::string t = render_plan_table(make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent, true)),
                                          Optimizer::AdamW);
  CHECK(t.find("positional embedding: std 0.02, lr factor n^{-1/2}") != std::string::npos);
  CHECK(t.find("768^{-1}") != std::string::npos);
  const std::string l = render_plan_table(make_plan(language(64), ScalingStrategy::from_preset(Preset::NeuralTangent)),
                                          Optimizer::AdamW);
  CHECK(l.find("word embedding: std 1, lr factor n^{-1/2}, rescale n^{-1/2}") != std::string::npos);
}

TEST_CASE("theory constants recover order-one constants at s = 0") {
  const ArchSpec a = vision(128);
  const ScalingPlan p = make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent));
  const TheoryConstants tc = theory_constants(p, a);
  CHECK(tc.C[gi(G::Q)] == doctest::Approx(0.5));
  CHECK(tc.C[gi(G::X)] == doctest::Approx(1.6));
  CHECK(tc.Lambda[gi(G::V)] == doctest::Approx(1.0));
  CHECK(tc.C_head == doctest::Approx(1.0));
  CHECK(tc.C_emb == doctest::Approx(1.0));
}

TEST_CASE("invalid strategies and architectures are rejected") {
  ArchSpec a = vision(30);
  CHECK_THROWS_AS(make_plan(a, ScalingStrategy::from_preset(Preset::NeuralTangent)), InputError);
  CHECK_THROWS_AS(make_plan(vision(64), ScalingStrategy::custom(1.5)), InputError);
  CHECK_THROWS_AS(parse_preset("nope"), InputError);
}
