// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Monte-Carlo statistics over random initializations of finite-width models.

#ifndef WIDEFORMER_LAB_HPP_
#define WIDEFORMER_LAB_HPP_

#include <string>
#include <vector>

#include "wideformer/ntk.hpp"
#include "wideformer/transformer.hpp"

namespace wf {

// Mean and standard error of a matrix-valued statistic, one value per init.
class MatrixStat {
 public:
  void add(const Eigen::MatrixXd& v);
  long count() const { return n_; }
  Eigen::MatrixXd mean() const;
  Eigen::MatrixXd se() const;  // infinite when count < 2

 private:
  Eigen::MatrixXd sum_, sumsq_;
  long n_ = 0;
};

struct ScalarStat {
  double sum = 0, sumsq = 0;
  long n = 0;
  void add(double v) { sum += v; sumsq += v * v; ++n; }
  double mean() const { return n ? sum / n : 0.0; }
  double se() const;
};

struct McSummary {
  std::string label;
  Eigen::MatrixXd mean, se;
  long n_inits = 0;
  Eigen::MatrixXd off_mean, off_se;           // cross-channel statistic
  GroupKernels group_mean, group_se;          // NTK only
};

struct McOptions {
  long n_inits = 64;
  std::uint64_t seed = 1;
  Distribution dist = Distribution::Normal;
  int channels = 4;  // output channels used at the head
};

// Per block: stem, residual blocks, head (and "head:pooled" when pooling).
std::vector<McSummary> empirical_kernel(const ArchSpec& arch, const ScalingPlan& plan,
                                        const Inputs& inputs, const McOptions& opt);

// Output NTK with SGD factors, channel-averaged, with per-group partial sums.
McSummary empirical_ntk(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                        const McOptions& opt);

// Per-init output NTK (used by deterministic checks).
struct NtkSample {
  Eigen::MatrixXd theta;       // channel-averaged
  Eigen::MatrixXd cross;       // channel i vs i+1
  GroupKernels by_group;
};
NtkSample ntk_single_init(const ModelParams& params, const ScalingPlan& plan, const Inputs& inputs,
                          const std::vector<int>& channels);

struct GroupGradStat {
  ParamGroup group;
  double mean_abs = 0, se = 0;
  long n_inits = 0;
};
// Mean |dL/dtheta| per group for L = sum(f) / (|D| T n_out).
std::vector<GroupGradStat> grad_magnitude_stats(const ArchSpec& arch, const ScalingPlan& plan,
                                                const Inputs& inputs, const McOptions& opt);

struct ProbeOptions {
  Optimizer optimizer = Optimizer::Sgd;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
};
struct ProbeStat {
  double mean_abs_df_over_lr = 0, se = 0;
  long n_inits = 0;
};
ProbeStat one_step_probe(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                         const ProbeOptions& probe, const McOptions& opt);

// Empirical LN backward factor (1/n) sum_jk ds_p,j/dz_p,k ds_q,j/dz_q,k at
// the LN feeding residual block `block` (block == depth: the head), plus the
// worst |(1/n) sum s^2 - 1| seen across inits.
struct LnStats {
  McSummary factor;
  double max_norm_error = 0;
};
LnStats ln_backward_stats(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                          int block, const McOptions& opt);

// Moments of Delta G = (1/n) sum z^2 - G_theory and nabla G = ((1/n) sum z)^2
// on diagonal pairs of z at trace position `position` (0 = stem), averaged
// over pairs.  Values: E[dG], E[nablaG], E[dG^2] - 2 G^2/n, E[dG nablaG].
struct EightfoldStats {
  double dG = 0, nablaG = 0, dG2_excess = 0, dG_nablaG = 0;
  double se_dG = 0, se_nablaG = 0, se_dG2_excess = 0, se_dG_nablaG = 0;
};
EightfoldStats eightfold_stats(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                               int position, const Eigen::VectorXd& G_theory_diag,
                               const McOptions& opt);

// Query-key dot-product moments at MHSA block `block` over inits and heads.
struct QkStats {
  MatrixStat second;                 // E[W~_a W~_b]
  MatrixStat cross_head;             // E[W~^h_a W~^{h+1}_b]
  std::vector<std::vector<int>> quads;
  std::vector<ScalarStat> fourth;    // E[W~_a W~_b W~_c W~_d] per quad
};
QkStats qk_dot_stats(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                     int block, const std::vector<std::vector<int>>& quads, const McOptions& opt);

}  // namespace wf

#endif  // WIDEFORMER_LAB_HPP_
