// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Run configuration, loaded from TOML.  See README.md for the schema.

#ifndef WIDEFORMER_CONFIG_HPP_
#define WIDEFORMER_CONFIG_HPP_

#include <optional>
#include <string>
#include <vector>

#include "wideformer/kernels.hpp"
#include "wideformer/lab.hpp"

namespace wf {

struct Tolerances {
  double fd_relative = 1e-6;     // Jacobian vs finite differences
  double converge_ratio = 0.6;   // |G^ - G| at widest / narrowest width
  double diagonal_z = 5.0;       // cross-channel statistics
  double ln_forward = 1e-12;     // (1/n) sum s^2 - 1 at eps = 0
  double ln_backward_z = 3.0;
  double eightfold_band = 2.0;   // ratio within [4/band, 4*band] for a 4x width step
  double attention_z = 4.0;
  double ntk_slack = 10.0;       // absolute slack is ntk_slack / n
  double grad_ratio = 0.2;       // relative error of |g| ratios
  double update_flatness = 1.5;  // max/min of |df|/lr across widths
};

struct VerifySettings {
  std::vector<int> widths{128, 256, 512};
  long n_inits = 64;        // gradient, probe, diagonality and LN checks
  long kernel_inits = 0;    // 0 selects 8 * n_inits
  long ntk_inits = 0;       // 0 selects 2 * n_inits
  long attention_inits = 0; // 0 selects 16 * n_inits
  std::uint64_t seed = 1;
  int channels = 4;
  std::vector<int> attention_heads{4, 8};
  Tolerances tol;

  long kernel() const { return kernel_inits > 0 ? kernel_inits : 8 * n_inits; }
  long ntk() const { return ntk_inits > 0 ? ntk_inits : 2 * n_inits; }
  long attention() const { return attention_inits > 0 ? attention_inits : 16 * n_inits; }
};

struct RunConfig {
  ArchSpec arch;
  ScalingStrategy strategy;
  Optimizer optimizer = Optimizer::AdamW;
  // Unset entries fall back to InitConstants::defaults / LrConstants::defaults.
  std::array<std::optional<double>, kNumGroups> init_constant, init_std, sgd_constant,
      adamw_constant, sgd_factor, adamw_factor;
  int samples = 2;
  std::uint64_t data_seed = 3;
  Distribution distribution = Distribution::Normal;
  PropagateOptions propagate;
  VerifySettings verify;
  ProbeOptions probe;
  std::string out_dir = "out";
  std::string source = "<defaults>";

  // Checks cross-field invariants; throws InputError.
  void validate() const;
};

// Parse errors carry "file:line:column: message" text.
RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::string& path);

// Plan for `arch` (defaults to cfg.arch) with every override applied:
// init_std and factor overrides are absolute values, constants scale the
// fan and width powers.
ScalingPlan build_plan(const RunConfig& cfg, const ArchSpec& arch);
inline ScalingPlan build_plan(const RunConfig& cfg) { return build_plan(cfg, cfg.arch); }

Inputs build_inputs(const RunConfig& cfg, const ArchSpec& arch);

}  // namespace wf

#endif  // WIDEFORMER_CONFIG_HPP_
