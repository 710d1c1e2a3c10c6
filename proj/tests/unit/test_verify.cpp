#include "json.hpp"

#include "doctest.h"
#include "wideformer/verify.hpp"

using namespace wf;

TEST_CASE("verdict aggregation") {
  CriterionResult c;
  CHECK(c.verdict() == Verdict::Inconclusive);  // nothing checked
  c.checks.push_back({"a", 0, 1, Verdict::Pass, ""});
  c.checks.push_back({"b", 0, 1, Verdict::Inconclusive, ""});
  CHECK(c.verdict() == Verdict::Inconclusive);
  c.checks.push_back({"c", 2, 1, Verdict::Fail, ""});
  CHECK(c.verdict() == Verdict::Fail);
  c.id = 3;
  c.title = "x";
  CHECK(summary_line(c).rfind("[FAIL] 3 x", 0) == 0);
}

TEST_CASE("reference plan tables pass") {
  RunConfig cfg;
  VerifyArtifacts art;
  const CriterionResult r = check_plan_tables(cfg, art);
  for (const auto& ch : r.checks) {
    INFO(ch.name, ": ", ch.detail);
    CHECK(ch.verdict == Verdict::Pass);
  }
  CHECK(r.checks.size() == reference_tables().size() + 2);
}

TEST_CASE("gradient check passes") {
  RunConfig cfg;
  VerifyArtifacts art;
  const CriterionResult r = check_gradients(cfg, art);
  for (const auto& ch : r.checks) {
    INFO(ch.name, ": ", ch.value, " ", ch.detail);
    CHECK(ch.verdict == Verdict::Pass);
  }
}

TEST_CASE("report outputs") {
  RunConfig cfg;
  const VerifyReport rep = run_verify(cfg, {10});
  REQUIRE(rep.criteria.size() == 1);
  CHECK(rep.all_pass());
  const auto j = nlohmann::json::parse(report_json(rep, cfg));
  CHECK(j["criteria"][0]["id"] == 10);
  CHECK(verify_csv(rep).find("criterion") != std::string::npos);
  CHECK(grads_csv(rep.artifacts).rfind("model,group,width,mean_abs_grad,stderr\n", 0) == 0);
  CHECK_THROWS_AS(run_verify(cfg, {11}), InputError);
}
