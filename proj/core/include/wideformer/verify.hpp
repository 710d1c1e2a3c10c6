// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Theory-versus-simulation checks.  Each criterion is a group of checks
// with a value, a tolerance and a verdict; a check whose Monte-Carlo error
// is too large to decide is "inconclusive" rather than failed.

#ifndef WIDEFORMER_VERIFY_HPP_
#define WIDEFORMER_VERIFY_HPP_

#include <functional>
#include <string>
#include <vector>

#include "wideformer/config.hpp"

namespace wf {

enum class Verdict { Pass, Fail, Inconclusive };
std::string_view to_string(Verdict v);

struct CheckResult {
  std::string name;
  double value = 0;
  double tolerance = 0;
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<CheckResult> checks;
  double seconds = 0;
  std::string error;  // set when the criterion threw

  // Fail if any check failed, else inconclusive if any was, else pass.
  Verdict verdict() const;
};

struct GradRow {
  std::string model;
  ParamGroup group;
  int width;
  double mean_abs_grad, stderr_;
};
struct ProbeRow {
  std::string plan;
  Optimizer optimizer;
  int width;
  double mean_abs_df_over_lr, stderr_;
};

// Side outputs collected while checking, written as CSV by the CLI.
struct VerifyArtifacts {
  std::vector<GradRow> grads;
  std::vector<ProbeRow> probes;
  std::vector<std::pair<int, std::vector<McSummary>>> kernels;  // (width, per-block estimates)
};

struct VerifyReport {
  std::vector<CriterionResult> criteria;
  VerifyArtifacts artifacts;
  bool all_pass() const;
};

using CriterionFn = std::function<CriterionResult(const RunConfig&, VerifyArtifacts&)>;
struct Criterion {
  int id;
  std::string title;
  CriterionFn run;
};

CriterionResult check_gradients(const RunConfig& cfg, VerifyArtifacts& art);          // 1
CriterionResult check_kernel_convergence(const RunConfig& cfg, VerifyArtifacts& art); // 2
CriterionResult check_diagonality(const RunConfig& cfg, VerifyArtifacts& art);        // 3
CriterionResult check_layer_norm(const RunConfig& cfg, VerifyArtifacts& art);         // 4
CriterionResult check_eightfold(const RunConfig& cfg, VerifyArtifacts& art);          // 5
CriterionResult check_attention(const RunConfig& cfg, VerifyArtifacts& art);          // 6
CriterionResult check_ntk(const RunConfig& cfg, VerifyArtifacts& art);                // 7
CriterionResult check_grad_scaling(const RunConfig& cfg, VerifyArtifacts& art);       // 8
CriterionResult check_updates(const RunConfig& cfg, VerifyArtifacts& art);            // 9
CriterionResult check_plan_tables(const RunConfig& cfg, VerifyArtifacts& art);        // 10

const std::vector<Criterion>& all_criteria();

// Runs the selected criteria (all when `only` is empty).  Exceptions inside
// a criterion are recorded as a failed check, so the report is complete.
VerifyReport run_verify(const RunConfig& cfg, const std::vector<int>& only = {},
                        const std::function<void(const CriterionResult&)>& progress = {});

std::string report_json(const VerifyReport& report, const RunConfig& cfg);
std::string verify_csv(const VerifyReport& report);
std::string grads_csv(const VerifyArtifacts& art);
std::string probe_csv(const VerifyArtifacts& art);
// Columns: block,pair1,pair2,estimate,stderr,n_inits
std::string mc_kernel_csv(const std::vector<McSummary>& estimates);

// One line per criterion, e.g. "[PASS] 3 diagonality (12.1 s)".
std::string summary_line(const CriterionResult& c);

// Expected entries of the reference plan tables (criterion 10).
struct TableRow {
  ParamGroup group;
  Monomial init_std;  // coefficient 0 means "any order-one constant"
  Monomial lr;
};
struct ReferenceTable {
  std::string name;
  ArchSpec arch;
  ScalingStrategy strategy;
  std::array<std::optional<double>, kNumGroups> init_std_override;
  std::vector<TableRow> rows;
  std::optional<Monomial> rescale;
};
std::vector<ReferenceTable> reference_tables();

}  // namespace wf

#endif  // WIDEFORMER_VERIFY_HPP_
