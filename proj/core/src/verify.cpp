// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/verify.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "wideformer/io.hpp"
#include "wideformer/transformer.hpp"

namespace wf {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

Verdict CriterionResult::verdict() const {
  if (!error.empty()) return Verdict::Fail;
  bool inconclusive = checks.empty();
  for (const auto& c : checks) {
    if (c.verdict == Verdict::Fail) return Verdict::Fail;
    if (c.verdict == Verdict::Inconclusive) inconclusive = true;
  }
  return inconclusive ? Verdict::Inconclusive : Verdict::Pass;
}

bool VerifyReport::all_pass() const {
  for (const auto& c : criteria)
    if (c.verdict() != Verdict::Pass) return false;
  return !criteria.empty();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CheckResult make_check(std::string name, double value, double tol, bool ok, bool decidable,
                       std::string detail = {}) {
  return {std::move(name), value, tol,
          !decidable ? Verdict::Inconclusive : (ok ? Verdict::Pass : Verdict::Fail),
          std::move(detail)};
}

// |d| / se with the convention 0/0 = 0 (deterministic entries).
double zscore(double d, double se) {
  if (se > 0) return std::abs(d) / se;
  return std::abs(d) <= 1e-12 ? 0.0 : kInf;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

int width_lo(const RunConfig& c) { return c.verify.widths.front(); }
int width_hi(const RunConfig& c) { return c.verify.widths.back(); }
int width_mid(const RunConfig& c) { return c.verify.widths[c.verify.widths.size() / 2]; }

// Architecture for one check: the configured model when the modality
// matches, else the modality's defaults; blocks given with bidirectional
// attention are made causal for language.
ArchSpec model_arch(const RunConfig& cfg, Modality m, const std::vector<BlockKind>& blocks,
                    int width, int heads = 0) {
  ArchSpec a;
  if (cfg.arch.modality == m) {
    a = cfg.arch;
  } else {
    a.modality = m;
    a.T = cfg.arch.T;
    a.M = cfg.arch.M;
    a.H = cfg.arch.H;
    a.activation = cfg.arch.activation;
    if (m == Modality::Language) {
      a.n_in = 32;
      a.weight_tying = true;
    }
  }
  if (!blocks.empty()) {
    a.blocks = blocks;
    if (m == Modality::Language)
      for (auto& b : a.blocks)
        if (b == BlockKind::MhsaBidirectional) b = BlockKind::MhsaMasked;
  }
  a.n = width;
  if (heads > 0) a.H = heads;
  a.validate();
  return a;
}

std::vector<BlockKind> attn_mlp() { return {BlockKind::MhsaBidirectional, BlockKind::Mlp}; }

McOptions mc_options(const RunConfig& cfg, long n_inits, std::uint64_t salt) {
  McOptions o;
  o.n_inits = n_inits;
  o.seed = cfg.verify.seed * 1000003ull + salt;
  o.dist = cfg.distribution;
  o.channels = cfg.verify.channels;
  return o;
}

// Theory kernels averaged over independent attention-moment replicates;
// the spread gives the theory's own Monte-Carlo error.
struct TheoryStat {
  std::vector<Eigen::MatrixXd> G_mean, G_se;  // per kernel-trace entry
  KernelTrace first;
  Eigen::MatrixXd ntk_mean, ntk_se;           // output NTK (pooled if pooling)
  GroupKernels group_mean, group_se;
};

constexpr int kReplicates = 4;

TheoryStat theory(const RunConfig& cfg, const ArchSpec& arch, const ScalingPlan& plan,
                  const Inputs& inputs, bool with_ntk) {
  TheoryStat t;
  std::vector<MatrixStat> G;
  MatrixStat ntk;
  std::array<MatrixStat, kNumGroups> groups;
  for (int r = 0; r < kReplicates; ++r) {
    PropagateOptions o = cfg.propagate;
    o.seed = cfg.propagate.seed + 7919ull * r;
    KernelTrace kt = propagate_kernels(arch, plan, inputs, o);
    if (G.empty()) G.resize(kt.entries.size());
    for (std::size_t i = 0; i < kt.entries.size(); ++i) G[i].add(kt.entries[i].G.K);
    if (with_ntk) {
      NtkTrace nt = propagate_ntk(kt, arch, plan, o.quadrature_order);
      const bool pooled = arch.pooling == Pooling::TokenMean;
      ntk.add(pooled ? nt.pooled : nt.head().theta.K);
      for (int g = 0; g < kNumGroups; ++g) {
        const Eigen::MatrixXd& m = pooled ? nt.pooled_by_group[g] : nt.head().by_group[g];
        if (m.size()) groups[g].add(m);
      }
    }
    if (r == 0) t.first = std::move(kt);
  }
  for (auto& s : G) {
    t.G_mean.push_back(s.mean());
    t.G_se.push_back(s.se());
  }
  if (with_ntk) {
    t.ntk_mean = ntk.mean();
    t.ntk_se = ntk.se();
    for (int g = 0; g < kNumGroups; ++g)
      if (groups[g].count()) {
        t.group_mean[g] = groups[g].mean();
        t.group_se[g] = groups[g].se();
      }
  }
  return t;
}

// Combined standard error of a simulation-minus-theory difference.
Eigen::MatrixXd combined(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a.array().square() + b.array().square()).sqrt().matrix();
}

bool finite_se(const Eigen::MatrixXd& se) { return se.size() && se.allFinite(); }

// Worst z-score of `mean - expected` over the upper triangle.
struct ZStat {
  double worst = 0;
  bool decidable = true;
};
ZStat worst_z(const Eigen::MatrixXd& diff, const Eigen::MatrixXd& se, double slack = 0.0) {
  ZStat z;
  z.decidable = finite_se(se);
  for (Eigen::Index p = 0; p < diff.rows(); ++p)
    for (Eigen::Index q = p; q < diff.cols(); ++q)
      z.worst = std::max(z.worst, zscore(std::max(0.0, std::abs(diff(p, q)) - slack), se(p, q)));
  return z;
}

template <typename F>
CriterionResult timed(int id, std::string title, F&& body) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  const auto t0 = std::chrono::steady_clock::now();
  body(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string model_name(const ArchSpec& a) {
  std::string s(to_string(a.modality));
  if (a.modality == Modality::Language) s += a.tied_head() ? "-tied" : "-untied";
  return s;
}

}  // namespace

// ---- 1: Jacobians vs finite differences ---------------------------------------

CriterionResult check_gradients(const RunConfig& cfg, VerifyArtifacts&) {
  return timed(1, "jacobian vs finite differences", [&](CriterionResult& r) {
    const double h = 1e-5;
    std::vector<ArchSpec> models;
    ArchSpec v = model_arch(cfg, Modality::Vision, attn_mlp(), 16, 2);
    v.n_in = std::min(v.n_in, 16);
    v.n_out = std::min(v.n_out, 8);
    v.T = 4;
    models.push_back(v);
    ArchSpec l = model_arch(cfg, Modality::Language, attn_mlp(), 16, 2);
    l.n_in = 12;
    l.T = 4;
    l.weight_tying = true;
    models.push_back(l);
    l.weight_tying = false;
    l.n_out = 8;
    models.push_back(l);

    for (const ArchSpec& arch : models) {
      const ScalingPlan plan = build_plan(cfg, arch);
      ModelParams P = init_model(arch, plan, cfg.verify.seed + 17, cfg.distribution);
      // A non-zero head bias exercises the general case.
      if (P.head_b.size()) P.head_b.setConstant(0.1);
      const Inputs inputs = make_inputs(arch, 2, cfg.data_seed);
      const bool pooled = arch.pooling == Pooling::TokenMean;
      const int out = arch.output_dim(), T = arch.T;
      std::vector<OutputIndex> sel = {{0, 0, 0}, {1, T - 1, 1 % out}, {0, T - 1, (out - 1)}, {1, 1 % T, 2 % out}};
      if (pooled)
        for (auto& s : sel) s.t = -1;
      const auto jac = output_jacobian(P, inputs, sel);
      auto eval = [&](const ModelParams& Q) {
        const ForwardTrace ft = forward_pass(Q, inputs);
        Eigen::VectorXd v(sel.size());
        for (std::size_t k = 0; k < sel.size(); ++k) {
          const auto& s = ft.samples[sel[k].alpha];
          v(Eigen::Index(k)) = sel[k].t < 0 ? s.pooled(sel[k].i) : s.f(sel[k].t, sel[k].i);
        }
        return v;
      };
      // Analytic gradients, flattened in for_each order.
      std::vector<std::vector<Eigen::MatrixXd>> an(sel.size());
      for (std::size_t k = 0; k < sel.size(); ++k)
        jac[k].for_each([&](ParamGroup, Eigen::Ref<const Eigen::MatrixXd> m) { an[k].emplace_back(m); });

      std::array<double, kNumGroups> err{}, scale{};
      std::array<bool, kNumGroups> seen{};
      std::size_t idx = 0;
      ModelParams Q = P;
      Q.for_each([&](ParamGroup g, Eigen::Ref<Eigen::MatrixXd> m) {
        seen[gi(g)] = true;
        for (Eigen::Index e = 0; e < m.size(); ++e) {
          double& x = m.data()[e];
          const double x0 = x;
          x = x0 + h;
          const Eigen::VectorXd fp = eval(Q);
          x = x0 - h;
          const Eigen::VectorXd fm = eval(Q);
          x = x0;
          for (std::size_t k = 0; k < sel.size(); ++k) {
            const double fd = (fp(Eigen::Index(k)) - fm(Eigen::Index(k))) / (2 * h);
            const double a = an[k][idx].data()[e];
            err[gi(g)] = std::max(err[gi(g)], std::abs(fd - a));
            scale[gi(g)] = std::max(scale[gi(g)], std::abs(a));
          }
        }
        ++idx;
      });
      for (ParamGroup g : kAllGroups) {
        if (!seen[gi(g)]) continue;
        const double rel = scale[gi(g)] > 0 ? err[gi(g)] / scale[gi(g)] : err[gi(g)];
        r.checks.push_back(make_check(model_name(arch) + ":" + std::string(to_string(g)), rel,
                                      cfg.verify.tol.fd_relative, rel < cfg.verify.tol.fd_relative, true,
                                      "max |fd - grad| / max |grad|"));
      }
    }
  });
}

// ---- 2: forward-kernel convergence --------------------------------------------

CriterionResult check_kernel_convergence(const RunConfig& cfg, VerifyArtifacts& art) {
  return timed(2, "forward-kernel convergence", [&](CriterionResult& r) {
    const std::vector<BlockKind> blocks{BlockKind::MhsaBidirectional, BlockKind::Mlp,
                                        BlockKind::MhsaBidirectional};
    const int n_lo = width_lo(cfg), n_hi = width_hi(cfg);
    const double ratio = cfg.verify.tol.converge_ratio;
    const ArchSpec a_lo = model_arch(cfg, Modality::Vision, blocks, n_lo);
    const ArchSpec a_hi = model_arch(cfg, Modality::Vision, blocks, n_hi);
    const Inputs inputs = build_inputs(cfg, a_lo);
    const ScalingPlan p_lo = build_plan(cfg, a_lo), p_hi = build_plan(cfg, a_hi);
    const TheoryStat t_lo = theory(cfg, a_lo, p_lo, inputs, false);
    const TheoryStat t_hi = theory(cfg, a_hi, p_hi, inputs, false);
    const auto mc_lo = empirical_kernel(a_lo, p_lo, inputs, mc_options(cfg, cfg.verify.kernel(), 2));
    const auto mc_hi = empirical_kernel(a_hi, p_hi, inputs, mc_options(cfg, cfg.verify.kernel(), 3));
    art.kernels.push_back({n_lo, mc_lo});
    art.kernels.push_back({n_hi, mc_hi});

    // Residual block outputs: estimate index b, trace entry 1 + b.
    for (int b = 1; b <= a_lo.depth(); ++b) {
      const Eigen::MatrixXd d_lo = (mc_lo[b].mean - t_lo.G_mean[1 + b]).cwiseAbs();
      const Eigen::MatrixXd d_hi = (mc_hi[b].mean - t_hi.G_mean[1 + b]).cwiseAbs();
      const Eigen::MatrixXd s_lo = combined(mc_lo[b].se, t_lo.G_se[1 + b]);
      const Eigen::MatrixXd s_hi = combined(mc_hi[b].se, t_hi.G_se[1 + b]);
      int conclusive = 0, failed = 0, pairs = 0;
      double worst = 0, z_lo = 0, z_hi = 0;
      for (Eigen::Index p = 0; p < d_lo.rows(); ++p)
        for (Eigen::Index q = p; q < d_lo.cols(); ++q) {
          ++pairs;
          z_lo = std::max(z_lo, zscore(d_lo(p, q), s_lo(p, q)));
          z_hi = std::max(z_hi, zscore(d_hi(p, q), s_hi(p, q)));
          const double tol = ratio * d_lo(p, q);
          if (!(s_hi(p, q) < tol / 3 && s_lo(p, q) < tol / 3)) continue;
          ++conclusive;
          const double rr = d_hi(p, q) / d_lo(p, q);
          worst = std::max(worst, rr);
          if (d_hi(p, q) > tol) ++failed;
        }
      r.checks.push_back(make_check(
          mc_lo[b].label + ":max_ratio", worst, ratio, failed == 0, conclusive > 0,
          std::to_string(conclusive) + "/" + std::to_string(pairs) + " pairs resolved, " +
              std::to_string(failed) + " above tolerance; n=" + std::to_string(n_lo) + "->" +
              std::to_string(n_hi) + "; max |G^-G|/stderr " + fmt(z_lo, 3) + " -> " + fmt(z_hi, 3)));
    }
  });
}

// ---- 3: diagonality -----------------------------------------------------------

CriterionResult check_diagonality(const RunConfig& cfg, VerifyArtifacts&) {
  return timed(3, "channel diagonality", [&](CriterionResult& r) {
    const ArchSpec arch = model_arch(cfg, cfg.arch.modality, {}, width_mid(cfg));
    const ScalingPlan plan = build_plan(cfg, arch);
    const Inputs inputs = build_inputs(cfg, arch);
    const double tol = cfg.verify.tol.diagonal_z;
    const auto mc = empirical_kernel(arch, plan, inputs, mc_options(cfg, cfg.verify.n_inits, 4));
    for (const auto& m : mc) {
      const ZStat z = worst_z(m.off_mean, m.off_se);
      r.checks.push_back(make_check("kernel:" + m.label, z.worst, tol, z.worst <= tol, z.decidable,
                                    "max |cross-channel mean| / stderr"));
    }
    const McSummary nt = empirical_ntk(arch, plan, inputs, mc_options(cfg, cfg.verify.n_inits, 5));
    const ZStat z = worst_z(nt.off_mean, nt.off_se);
    r.checks.push_back(make_check("ntk:output", z.worst, tol, z.worst <= tol, z.decidable,
                                  "max |cross-channel NTK| / stderr"));
  });
}

// ---- 4: layer norm --------------------------------------------------------------

CriterionResult check_layer_norm(const RunConfig& cfg, VerifyArtifacts&) {
  return timed(4, "layer-norm exactness", [&](CriterionResult& r) {
    ArchSpec arch = model_arch(cfg, cfg.arch.modality, {}, width_mid(cfg));
    arch.eps_ln = 0.0;
    const ScalingPlan plan = build_plan(cfg, arch);
    const Inputs inputs = build_inputs(cfg, arch);
    const LnStats ln = ln_backward_stats(arch, plan, inputs, 0, mc_options(cfg, cfg.verify.n_inits, 6));
    r.checks.push_back(make_check("forward:max|mean(s^2)-1|", ln.max_norm_error, cfg.verify.tol.ln_forward,
                                  ln.max_norm_error <= cfg.verify.tol.ln_forward, true));
    const KernelTrace kt = propagate_kernels(arch, plan, inputs, cfg.propagate);
    const Eigen::MatrixXd th = ln_backward_factor(kt.before_block(0).G, arch.eps_ln);
    const ZStat z = worst_z(ln.factor.mean - th, ln.factor.se);
    r.checks.push_back(make_check("backward:stem", z.worst, cfg.verify.tol.ln_backward_z,
                                  z.worst <= cfg.verify.tol.ln_backward_z, z.decidable,
                                  "max |empirical - 1/sqrt(G G)| / stderr"));
  });
}

// ---- 5: eightfold suppression --------------------------------------------------

CriterionResult check_eightfold(const RunConfig& cfg, VerifyArtifacts&) {
  return timed(5, "eightfold suppression", [&](CriterionResult& r) {
    const int n_lo = width_lo(cfg), n_hi = width_hi(cfg);
    const ArchSpec a_lo = model_arch(cfg, Modality::Vision, attn_mlp(), n_lo);
    const ArchSpec a_hi = model_arch(cfg, Modality::Vision, attn_mlp(), n_hi);
    // First position after an MLP block: its kernel carries the non-Gaussian
    // corrections the expansion controls.
    int position = a_lo.depth();
    for (int b = 0; b < a_lo.depth(); ++b)
      if (a_lo.blocks[b] == BlockKind::Mlp) {
        position = b + 1;
        break;
      }
    const Inputs inputs = build_inputs(cfg, a_lo);
    const ScalingPlan p_lo = build_plan(cfg, a_lo), p_hi = build_plan(cfg, a_hi);
    const TheoryStat t_lo = theory(cfg, a_lo, p_lo, inputs, false);
    const TheoryStat t_hi = theory(cfg, a_hi, p_hi, inputs, false);
    const Eigen::VectorXd g_lo = t_lo.G_mean[1 + position].diagonal();
    const Eigen::VectorXd g_hi = t_hi.G_mean[1 + position].diagonal();
    const EightfoldStats e_lo = eightfold_stats(a_lo, p_lo, inputs, position, g_lo, mc_options(cfg, cfg.verify.kernel(), 7));
    const EightfoldStats e_hi = eightfold_stats(a_hi, p_hi, inputs, position, g_hi, mc_options(cfg, cfg.verify.kernel(), 8));
    // Theory error enters E[dG] directly.
    const double th_lo = t_lo.G_se[1 + position].diagonal().mean();
    const double th_hi = t_hi.G_se[1 + position].diagonal().mean();

    const double expected = double(n_hi) / n_lo, band = cfg.verify.tol.eightfold_band;
    auto ratio_check = [&](const std::string& name, double v_lo, double se_lo, double v_hi, double se_hi,
                           bool lower_only) {
      const double a = std::abs(v_lo), b = std::abs(v_hi);
      const double ratio = a / b;
      // Delta-method error of log(ratio); decide on its 2-sigma interval.
      const double log_se = std::sqrt(std::pow(se_lo / a, 2) + std::pow(se_hi / b, 2));
      const double lr = std::log(ratio), lo_edge = std::log(expected / band), hi_edge = std::log(expected * band);
      const double ci_lo = lr - 2 * log_se, ci_hi = lr + 2 * log_se;
      const bool inside = ci_lo >= lo_edge && (lower_only || ci_hi <= hi_edge);
      const bool outside = ci_hi < lo_edge || (!lower_only && ci_lo > hi_edge);
      const bool decidable = std::isfinite(log_se) && (inside || outside);
      const bool ok = inside;
      std::string detail = "|" + name + "| " + fmt(a) + " +- " + fmt(se_lo) + " -> " + fmt(b) + " +- " +
                           fmt(se_hi) + ", expected ratio " + fmt(expected) +
                           (lower_only ? " or more" : " within a factor " + fmt(band)) +
                           "; 2-sigma ratio interval [" + fmt(std::exp(ci_lo)) + ", " + fmt(std::exp(ci_hi)) + "]";
      r.checks.push_back(make_check(name + ":ratio", ratio, expected / band, ok, decidable, detail));
    };
    ratio_check("E[dG]", e_lo.dG, std::hypot(e_lo.se_dG, th_lo), e_hi.dG, std::hypot(e_hi.se_dG, th_hi), false);
    ratio_check("E[nablaG]", e_lo.nablaG, e_lo.se_nablaG, e_hi.nablaG, e_hi.se_nablaG, false);
    ratio_check("E[dG^2]-2G^2/n", e_lo.dG2_excess, e_lo.se_dG2_excess, e_hi.dG2_excess, e_hi.se_dG2_excess, false);
    ratio_check("E[dG*nablaG]", e_lo.dG_nablaG, e_lo.se_dG_nablaG, e_hi.dG_nablaG, e_hi.se_dG_nablaG, true);
  });
}

// ---- 6: attention Gaussianity ---------------------------------------------------

CriterionResult check_attention(const RunConfig& cfg, VerifyArtifacts&) {
  return timed(6, "query-key Gaussianity", [&](CriterionResult& r) {
    const double tol = cfg.verify.tol.attention_z;
    for (int H : cfg.verify.attention_heads) {
      const ArchSpec arch = model_arch(cfg, Modality::Vision, {BlockKind::MhsaBidirectional}, width_hi(cfg), H);
      const ScalingPlan plan = build_plan(cfg, arch);
      const Inputs inputs = build_inputs(cfg, arch);
      const KernelTrace kt = propagate_kernels(arch, plan, inputs, cfg.propagate);
      const TheoryConstants tc = theory_constants(plan, arch);
      const AttnKernel A = qk_covariance(*kt.before_block(0).F, tc.C[gi(ParamGroup::Q)], tc.C[gi(ParamGroup::K)]);
      const int d = A.dim(), T = arch.T;
      std::vector<std::vector<int>> quads = {
          {0, 0, 0, 0}, {1, 1, 1, 1}, {0, 0, d - 1, d - 1}, {0, 1, T * T + 2, d - 1},
          {A.index(0, 1, 2), A.index(0, 1, 2), A.index(1, 1, 2), A.index(1, 2, 1)}, {3, 3, 3, d / 2}};
      const QkStats st = qk_dot_stats(arch, plan, inputs, 0, quads,
                                      mc_options(cfg, cfg.verify.attention(), 9 + std::uint64_t(H)));
      const std::string tag = "H=" + std::to_string(H) + ":";
      const ZStat z2 = worst_z(st.second.mean() - A.A, st.second.se());
      r.checks.push_back(make_check(tag + "second", z2.worst, tol, z2.worst <= tol, z2.decidable,
                                    "max |E[W W] - A| / stderr over all index pairs"));
      if (H > 1) {
        const ZStat zc = worst_z(st.cross_head.mean(), st.cross_head.se());
        r.checks.push_back(make_check(tag + "cross_head", zc.worst, tol, zc.worst <= tol, zc.decidable,
                                      "max |E[W^h W^h+1]| / stderr"));
      }
      double worst = 0;
      bool decidable = true;
      for (std::size_t i = 0; i < quads.size(); ++i) {
        const double expect = wick_even_moment(A, quads[i]);
        const double se = st.fourth[i].se();
        decidable = decidable && std::isfinite(se);
        worst = std::max(worst, zscore(st.fourth[i].mean() - expect, se));
      }
      r.checks.push_back(make_check(tag + "fourth", worst, tol, worst <= tol, decidable,
                                    "max |E[WWWW] - Wick sum| / stderr over " + std::to_string(quads.size()) + " index quadruples"));
    }
  });
}

// ---- 7: NTK theory vs simulation --------------------------------------------------

CriterionResult check_ntk(const RunConfig& cfg, VerifyArtifacts&) {
  return timed(7, "NTK theory vs simulation", [&](CriterionResult& r) {
    const int n = width_hi(cfg);
    const double slack = cfg.verify.tol.ntk_slack / n;
    for (Modality m : {Modality::Vision, Modality::Language}) {
      const ArchSpec arch = model_arch(cfg, m, attn_mlp(), n);
      const ScalingPlan plan = build_plan(cfg, arch);
      const Inputs inputs = build_inputs(cfg, arch);
      const TheoryStat th = theory(cfg, arch, plan, inputs, true);
      const McSummary mc = empirical_ntk(arch, plan, inputs, mc_options(cfg, cfg.verify.ntk(), 20 + int(m)));
      auto compare = [&](const std::string& name, const Eigen::MatrixXd& est, const Eigen::MatrixXd& se,
                         const Eigen::MatrixXd& t, const Eigen::MatrixXd& tse) {
        const Eigen::MatrixXd s = combined(se, tse);
        double worst = 0;
        for (Eigen::Index p = 0; p < est.rows(); ++p)
          for (Eigen::Index q = p; q < est.cols(); ++q)
            worst = std::max(worst, std::abs(est(p, q) - t(p, q)) / (3 * s(p, q) + slack));
        r.checks.push_back(make_check(model_name(arch) + ":" + name, worst, 1.0, worst <= 1.0, finite_se(se),
                                      "max |sim - theory| / (3 combined stderr + " + fmt(cfg.verify.tol.ntk_slack) + "/n)"));
      };
      compare("total", mc.mean, mc.se, th.ntk_mean, th.ntk_se);
      for (ParamGroup g : kAllGroups) {
        if (!mc.group_mean[gi(g)].size()) continue;
        if (!th.group_mean[gi(g)].size()) throw NumericError("check_ntk", "theory lacks group " + std::string(to_string(g)));
        compare(std::string(to_string(g)), mc.group_mean[gi(g)], mc.group_se[gi(g)], th.group_mean[gi(g)],
                th.group_se[gi(g)]);
      }
    }
  });
}

// ---- 8: gradient magnitudes -----------------------------------------------------

CriterionResult check_grad_scaling(const RunConfig& cfg, VerifyArtifacts& art) {
  return timed(8, "gradient-magnitude scaling", [&](CriterionResult& r) {
    const int n_lo = width_lo(cfg), n_hi = width_hi(cfg);
    const double tol = cfg.verify.tol.grad_ratio;
    // Body gradients follow the head: |g| ~ n^{-(1+s)/2}; head gradients
    // see order-one signals.
    const double s = cfg.strategy.preset == Preset::Standard ? 0.0 : cfg.strategy.meta_s();
    for (Modality m : {Modality::Vision, Modality::Language}) {
      std::map<int, std::vector<GroupGradStat>> by_width;
      std::string name;
      for (int w : cfg.verify.widths) {
        const ArchSpec arch = model_arch(cfg, m, {}, w);
        name = model_name(arch);
        const ScalingPlan plan = build_plan(cfg, arch);
        const Inputs inputs = build_inputs(cfg, arch);
        by_width[w] = grad_magnitude_stats(arch, plan, inputs, mc_options(cfg, cfg.verify.n_inits, 30 + int(m)));
        for (const auto& g : by_width[w]) art.grads.push_back({name, g.group, w, g.mean_abs, g.se});
      }
      const auto& lo = by_width[n_lo];
      const auto& hi = by_width[n_hi];
      for (std::size_t i = 0; i < lo.size(); ++i) {
        const ParamGroup g = lo[i].group;
        const double power = is_head_group(g) ? 0.0 : -(1.0 + s) / 2.0;
        const double predicted = std::pow(double(n_hi) / n_lo, power);
        const double ratio = hi[i].mean_abs / lo[i].mean_abs;
        const double rel = ratio / predicted - 1.0;
        const double rel_se = ratio * std::hypot(lo[i].se / lo[i].mean_abs, hi[i].se / hi[i].mean_abs) / predicted;
        r.checks.push_back(make_check(name + ":" + std::string(to_string(g)), ratio, tol,
                                      std::abs(rel) <= tol, std::isfinite(rel_se) && rel_se <= tol,
                                      "ratio |g|(" + std::to_string(n_hi) + ")/|g|(" + std::to_string(n_lo) +
                                          ") vs predicted " + fmt(predicted) + " (power " + fmt(power) + ")"));
      }
    }
  });
}

// ---- 9: order-one updates ---------------------------------------------------------

CriterionResult check_updates(const RunConfig& cfg, VerifyArtifacts& art) {
  return timed(9, "order-one updates", [&](CriterionResult& r) {
    const double flat = cfg.verify.tol.update_flatness;
    struct Case {
      std::string name;
      Optimizer opt;
      bool standard;
    };
    const std::vector<Case> cases = {{"configured", Optimizer::Sgd, false},
                                     {"configured", Optimizer::AdamW, false},
                                     {"standard", Optimizer::AdamW, true}};
    for (const Case& c : cases) {
      RunConfig run = cfg;
      if (c.standard) {
        run.strategy = ScalingStrategy::from_preset(Preset::Standard);
        run.sgd_factor = {};
        run.adamw_factor = {};
      }
      std::vector<ProbeStat> stats;
      for (int w : cfg.verify.widths) {
        const ArchSpec arch = model_arch(run, cfg.arch.modality, {}, w);
        const ScalingPlan plan = build_plan(run, arch);
        const Inputs inputs = build_inputs(run, arch);
        ProbeOptions po = cfg.probe;
        po.optimizer = c.opt;
        stats.push_back(one_step_probe(arch, plan, inputs, po, mc_options(cfg, cfg.verify.n_inits, 40)));
        art.probes.push_back({c.name, c.opt, w, stats.back().mean_abs_df_over_lr, stats.back().se});
      }
      const std::string tag = c.name + ":" + std::string(to_string(c.opt));
      if (!c.standard) {
        double lo = kInf, hi = 0, rel_se = 0;
        for (const auto& s : stats) {
          lo = std::min(lo, s.mean_abs_df_over_lr);
          hi = std::max(hi, s.mean_abs_df_over_lr);
          rel_se = std::max(rel_se, s.se / s.mean_abs_df_over_lr);
        }
        const double spread = hi / lo;
        r.checks.push_back(make_check(tag + ":flatness", spread, flat, spread <= flat,
                                      std::isfinite(rel_se) && rel_se <= (flat - 1.0) / 3.0,
                                      "max/min of |df|/lr across widths"));
      } else {
        bool increasing = true, decidable = true;
        double worst = kInf;
        for (std::size_t i = 1; i < stats.size(); ++i) {
          const double d = stats[i].mean_abs_df_over_lr - stats[i - 1].mean_abs_df_over_lr;
          const double se = std::hypot(stats[i].se, stats[i - 1].se);
          worst = std::min(worst, d / stats[i - 1].mean_abs_df_over_lr);
          if (d <= 0) {
            increasing = false;
            if (!(std::abs(d) > 2 * se)) decidable = false;
          }
        }
        r.checks.push_back(make_check(tag + ":grows", worst, 0.0, increasing, decidable,
                                      "smallest relative increase of |df|/lr between consecutive widths"));
      }
    }
  });
}

// ---- 10: plan tables ----------------------------------------------------------------

std::vector<ReferenceTable> reference_tables() {
  using G = ParamGroup;
  const Monomial any_n_half{0.0, -0.5};  // order-one constant times n^{-1/2}
  auto mono = [](double c, double e_n, double e_in = 0, double e_out = 0) {
    return Monomial{c, e_n, e_in, e_out, 0.0};
  };
  ArchSpec vit;
  vit.modality = Modality::Vision;
  vit.n = 768;
  vit.H = 12;
  vit.M = 4;
  vit.n_in = 768;
  vit.n_out = 1000;
  vit.blocks = {BlockKind::MhsaBidirectional, BlockKind::Mlp};
  const std::vector<G> bulk = {G::Q, G::K, G::V, G::U, G::W, G::X};

  auto vit_table = [&](const std::string& name, Preset p, Monomial patch_lr, Monomial pe_lr, Monomial bulk_lr,
                       Monomial headw_std, Monomial headw_lr, Monomial headb_lr) {
    ReferenceTable t;
    t.name = name;
    t.arch = vit;
    t.strategy = ScalingStrategy::from_preset(p, true);
    t.rows.push_back({G::Patch, mono(1, 0, -0.5), patch_lr});
    t.rows.push_back({G::PosEmb, mono(0.02, 0), pe_lr});
    for (G g : bulk) t.rows.push_back({g, any_n_half, bulk_lr});
    t.rows.push_back({G::HeadW, headw_std, headw_lr});
    t.rows.push_back({G::HeadB, mono(0, 0), headb_lr});
    return t;
  };
  std::vector<ReferenceTable> out;
  const Monomial one = mono(1, 0);
  out.push_back(vit_table("vit:standard", Preset::Standard, one, one, one, mono(1, -0.5), one, one));
  out.push_back(vit_table("vit:neural-tangent", Preset::NeuralTangent, mono(1, -0.5, -1), mono(1, -0.5),
                          mono(1, -1.5), mono(1, -0.5), mono(1, -1, 0, -0.5), mono(1, 0, 0, -0.5)));
  out.push_back(vit_table("vit:hybrid", Preset::Hybrid, mono(1, -0.25, -1), mono(1, -0.25), mono(1, -1.25),
                          mono(1, -0.75), mono(1, -1, 0, -0.5), mono(1, 0, 0, -0.5)));
  out.push_back(vit_table("vit:maximal-update", Preset::MaximalUpdate, mono(1, 0, -1), mono(1, 0), mono(1, -1),
                          mono(1, -1), mono(1, -1, 0, -0.5), mono(1, 0, 0, -0.5)));

  ArchSpec lm;
  lm.modality = Modality::Language;
  lm.n = 1024;
  lm.H = 16;
  lm.M = 4;
  lm.n_in = 50000;
  lm.weight_tying = true;
  lm.blocks = {BlockKind::MhsaMasked, BlockKind::Mlp};
  ReferenceTable nt;
  nt.name = "language:neural-tangent";
  nt.arch = lm;
  nt.strategy = ScalingStrategy::from_preset(Preset::NeuralTangent, true);
  for (G g : bulk) nt.init_std_override[gi(g)] = 0.02;
  nt.rows.push_back({G::WordEmb, mono(1, 0), mono(1, -0.5)});
  nt.rows.push_back({G::PosEmb, mono(0.02, 0), mono(1, -0.5)});
  for (G g : bulk) nt.rows.push_back({g, mono(0.02, 0), mono(1, -1.5)});
  nt.rescale = mono(1, -0.5);
  out.push_back(nt);

  ReferenceTable st = nt;
  st.name = "language:standard";
  st.strategy = ScalingStrategy::from_preset(Preset::Standard, true);
  st.rows.clear();
  st.rows.push_back({G::WordEmb, mono(0.02, 0), one});
  st.rows.push_back({G::PosEmb, mono(0.02, 0), one});
  for (G g : bulk) st.rows.push_back({g, mono(0.02, 0), one});
  st.rescale = one;
  out.push_back(st);
  return out;
}

namespace {
bool same_powers(const Monomial& a, const Monomial& b) {
  return a.e_n == b.e_n && a.e_in == b.e_in && a.e_out == b.e_out && a.e_M == b.e_M;
}
bool coeff_match(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }
}  // namespace

CriterionResult check_plan_tables(const RunConfig& cfg, VerifyArtifacts&) {
  return timed(10, "plan tables", [&](CriterionResult& r) {
    for (const ReferenceTable& t : reference_tables()) {
      RunConfig run = cfg;
      run.strategy = t.strategy;
      run.init_constant = {};
      run.init_std = t.init_std_override;
      run.sgd_constant = {};
      run.adamw_constant = {};
      run.sgd_factor = {};
      run.adamw_factor = {};
      const ScalingPlan plan = build_plan(run, t.arch);
      int mismatches = 0;
      std::string detail;
      // Only the power of n is symbolic in the tables; M, n_in and n_out
      // are fixed numbers folded into the coefficient.
      auto fold = [&](const Monomial& m) {
        return Monomial{m.coeff * std::pow(plan.dims.n_in, m.e_in) * std::pow(plan.dims.n_out, m.e_out) *
                            std::pow(plan.dims.M, m.e_M),
                        m.e_n};
      };
      for (TableRow row : t.rows) {
        const Monomial std_ = fold(plan[row.group].init_var.sqrt());
        const Monomial lr = fold(plan[row.group].adamw);
        if (row.init_std.coeff != 0.0) row.init_std = fold(row.init_std);
        row.lr = fold(row.lr);
        const bool std_ok = same_powers(std_, row.init_std) &&
                            (row.init_std.coeff == 0.0 && row.group != ParamGroup::HeadB
                                 ? std_.coeff > 0
                                 : coeff_match(std_.coeff, row.init_std.coeff));
        const bool lr_ok = same_powers(lr, row.lr) && coeff_match(lr.coeff, row.lr.coeff);
        if (!std_ok || !lr_ok) {
          ++mismatches;
          detail += std::string(group_label(row.group)) + ": got std " + std_.render(plan.dims, false) +
                    ", lr " + lr.render(plan.dims, false) + "; ";
        }
      }
      if (t.rescale && !(same_powers(plan.n_rescale, *t.rescale) && coeff_match(plan.n_rescale.coeff, t.rescale->coeff))) {
        ++mismatches;
        detail += "rescale " + plan.n_rescale.render(plan.dims, false) + "; ";
      }
      r.checks.push_back(make_check(t.name, mismatches, 0, mismatches == 0, true,
                                    detail.empty() ? std::to_string(t.rows.size()) + " rows match" : detail));
    }
    // Rendered rows, as printed by the plan command.
    auto tables = reference_tables();
    auto rendered = [&](int idx) {
      RunConfig run = cfg;
      run.strategy = tables[idx].strategy;
      run.init_constant = {};
      run.init_std = tables[idx].init_std_override;
      run.sgd_constant = run.adamw_constant = {};
      run.sgd_factor = run.adamw_factor = {};
      return render_plan_table(build_plan(run, tables[idx].arch), Optimizer::AdamW);
    };
    const std::string vit = rendered(1), lm = rendered(4);
    const std::string row_pe = "positional embedding: std 0.02, lr factor n^{-1/2}";
    const std::string row_we = "word embedding: std 1, lr factor n^{-1/2}, rescale n^{-1/2}";
    r.checks.push_back(make_check("render:vit:positional", 0, 0, vit.find(row_pe) != std::string::npos, true, row_pe));
    r.checks.push_back(make_check("render:language:word", 0, 0, lm.find(row_we) != std::string::npos, true, row_we));
  });
}

// ---- driver and output ---------------------------------------------------------------

const std::vector<Criterion>& all_criteria() {
  static const std::vector<Criterion> list = {
      {1, "jacobian vs finite differences", check_gradients},
      {2, "forward-kernel convergence", check_kernel_convergence},
      {3, "channel diagonality", check_diagonality},
      {4, "layer-norm exactness", check_layer_norm},
      {5, "eightfold suppression", check_eightfold},
      {6, "query-key Gaussianity", check_attention},
      {7, "NTK theory vs simulation", check_ntk},
      {8, "gradient-magnitude scaling", check_grad_scaling},
      {9, "order-one updates", check_updates},
      {10, "plan tables", check_plan_tables},
  };
  return list;
}

VerifyReport run_verify(const RunConfig& cfg, const std::vector<int>& only,
                        const std::function<void(const CriterionResult&)>& progress) {
  for (int id : only)
    if (id < 1 || id > int(all_criteria().size()))
      throw InputError("unknown criterion " + std::to_string(id) + " (expected 1.." +
                       std::to_string(all_criteria().size()) + ")");
  VerifyReport report;
  for (const Criterion& c : all_criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    CriterionResult res;
    try {
      res = c.run(cfg, report.artifacts);
    } catch (const std::exception& e) {
      res.id = c.id;
      res.title = c.title;
      res.error = e.what();
    }
    if (progress) progress(res);
    report.criteria.push_back(std::move(res));
  }
  return report;
}

namespace {
ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(v > 0 ? "inf" : (v < 0 ? "-inf" : "nan")); }
}  // namespace

std::string report_json(const VerifyReport& report, const RunConfig& cfg) {
  ojson j;
  j["config"] = cfg.source;
  j["widths"] = cfg.verify.widths;
  j["seed"] = cfg.verify.seed;
  j["all_pass"] = report.all_pass();
  ojson crits = ojson::array();
  for (const auto& c : report.criteria) {
    ojson cj;
    cj["id"] = c.id;
    cj["title"] = c.title;
    cj["verdict"] = std::string(to_string(c.verdict()));
    if (!c.error.empty()) cj["error"] = c.error;
    ojson checks = ojson::array();
    for (const auto& k : c.checks) {
      checks.push_back(ojson{{"name", k.name},
                             {"value", number(k.value)},
                             {"tolerance", number(k.tolerance)},
                             {"pass", k.verdict == Verdict::Pass},
                             {"verdict", std::string(to_string(k.verdict))},
                             {"detail", k.detail}});
    }
    cj["checks"] = std::move(checks);
    crits.push_back(std::move(cj));
  }
  j["criteria"] = std::move(crits);
  return j.dump(2) + "\n";
}

std::string verify_csv(const VerifyReport& report) {
  std::ostringstream os;
  os << "criterion,name,value,tolerance,verdict\n";
  for (const auto& c : report.criteria) {
    if (!c.error.empty()) os << c.id << ",error,nan,nan,fail\n";
    for (const auto& k : c.checks)
      os << c.id << "," << k.name << "," << format_double(k.value) << "," << format_double(k.tolerance) << ","
         << to_string(k.verdict) << "\n";
  }
  return os.str();
}

std::string grads_csv(const VerifyArtifacts& art) {
  std::ostringstream os;
  os << "model,group,width,mean_abs_grad,stderr\n";
  for (const auto& g : art.grads)
    os << g.model << "," << to_string(g.group) << "," << g.width << "," << format_double(g.mean_abs_grad) << ","
       << format_double(g.stderr_) << "\n";
  return os.str();
}

std::string probe_csv(const VerifyArtifacts& art) {
  std::ostringstream os;
  os << "plan,optimizer,width,mean_abs_df_over_lr,stderr\n";
  for (const auto& p : art.probes)
    os << p.plan << "," << to_string(p.optimizer) << "," << p.width << "," << format_double(p.mean_abs_df_over_lr)
       << "," << format_double(p.stderr_) << "\n";
  return os.str();
}

std::string mc_kernel_csv(const std::vector<McSummary>& estimates) {
  std::ostringstream os;
  os << "block,pair1,pair2,estimate,stderr,n_inits\n";
  for (const auto& m : estimates)
    for (Eigen::Index p = 0; p < m.mean.rows(); ++p)
      for (Eigen::Index q = p; q < m.mean.cols(); ++q)
        os << m.label << "," << p << "," << q << "," << format_double(m.mean(p, q)) << ","
           << format_double(m.se(p, q)) << "," << m.n_inits << "\n";
  return os.str();
}

std::string summary_line(const CriterionResult& c) {
  std::string tag;
  switch (c.verdict()) {
    case Verdict::Pass: tag = "[PASS]"; break;
    case Verdict::Fail: tag = "[FAIL]"; break;
    case Verdict::Inconclusive: tag = "[INCONCLUSIVE]"; break;
  }
  std::ostringstream os;
  os << tag << " " << c.id << " " << c.title << " (" << std::fixed << std::setprecision(1) << c.seconds << " s)";
  if (!c.error.empty()) os << ": " << c.error;
  int failed = 0;
  for (const auto& k : c.checks)
    if (k.verdict != Verdict::Pass) ++failed;
  if (failed) os << ": " << failed << "/" << c.checks.size() << " checks not passed";
  return os.str();
}

}  // namespace wf
