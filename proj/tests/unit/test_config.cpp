#include <string>

#include "doctest.h"
#include "wideformer/config.hpp"

using namespace wf;

TEST_CASE("defaults and basic parsing") {
  const RunConfig c = parse_config(R"(
[arch]
modality = "vision"
width = 96
heads = 3
blocks = ["mhsa", "mlp", "mlp"]
[strategy]
preset = "maximal-update"
optimizer = "sgd"
[verify]
n_inits = 10
)");
  CHECK(c.arch.n == 96);
  CHECK(c.arch.depth() == 3);
  CHECK(c.strategy.preset == Preset::MaximalUpdate);
  CHECK(c.optimizer == Optimizer::Sgd);
  CHECK(c.verify.kernel() == 80);
  CHECK(c.verify.ntk() == 20);
  CHECK(c.verify.attention() == 160);
  CHECK(c.verify.widths == std::vector<int>{128, 256, 512});
}

TEST_CASE("language defaults") {
  const RunConfig c = parse_config("[arch]\nmodality = \"language\"\n");
  CHECK(c.arch.weight_tying);
  CHECK(c.arch.blocks.front() == BlockKind::MhsaMasked);
}

TEST_CASE("errors carry a location") {
  try {
    parse_config("[arch]\nwidth = 64\nwdith = 3\n", "x.toml");
    FAIL("expected an error");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x.toml:3:") == 0);
    CHECK(msg.find("arch.wdith") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("[arch]\nwidth = \"big\"\n"), InputError);
  CHECK_THROWS_AS(parse_config("[strategy]\ns = 0.5\n"), InputError);
  CHECK_THROWS_AS(parse_config("[strategy]\npreset = \"custom\"\ns = 1.5\n"), InputError);
  CHECK_THROWS_AS(parse_config("[arch]\nactivation = \"swish\"\n"), InputError);
  CHECK_THROWS_AS(parse_config("[arch\n"), InputError);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.toml"), InputError);
}

TEST_CASE("group overrides reach the plan") {
  const RunConfig c = parse_config(R"(
[arch]
width = 64
heads = 4
[constants.init]
Q = 2.0
[constants.init_std]
Patch = 0.02
[lr_factor.sgd]
HeadB = 0.25
)");
  const ScalingPlan p = build_plan(c);
  CHECK(p.init_var(ParamGroup::Q) == doctest::Approx(2.0 / 64));
  CHECK(p.init_std(ParamGroup::Patch) == doctest::Approx(0.02));
  CHECK(p.sgd(ParamGroup::HeadB) == doctest::Approx(0.25));
}

TEST_CASE("desk config loads") {
  const RunConfig c = load_config(std::string(WIDEFORMER_CONFIG_DIR) + "/desk.toml");
  CHECK(c.arch.n == 128);
  CHECK(c.strategy.preset == Preset::NeuralTangent);
  const Inputs in = build_inputs(c, c.arch);
  CHECK(in.samples() == c.samples);
}
