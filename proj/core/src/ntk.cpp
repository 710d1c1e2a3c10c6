// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/ntk.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace wf {

namespace {

Eigen::MatrixXd token_delta(int samples, int T) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(samples * T, samples * T);
  for (int p = 0; p < samples * T; ++p)
    for (int q = 0; q < samples * T; ++q)
      if (p % T == q % T) d(p, q) = 1.0;
  return d;
}

void set(GroupKernels& k, ParamGroup g, Eigen::MatrixXd m) {
  mirror_upper(m);
  k[gi(g)] = std::move(m);
}

Eigen::MatrixXd sum_groups(const GroupKernels& k, Eigen::Index P) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(P, P);
  for (const auto& m : k)
    if (m.size()) s += m;
  return s;
}

}  // namespace

PairKernel stem_ntk(const PairKernel& G0, double Lambda_emb, double Lambda_PE) {
  return G0.with(Lambda_emb * G0.K + Lambda_PE * token_delta(G0.samples, G0.T),
                 KernelRole::Theta);
}

PairKernel stem_ntk(const PairKernel& G0, const ScalingPlan& plan, const ArchSpec& arch) {
  const TheoryConstants tc = theory_constants(plan, arch);
  return stem_ntk(G0, tc.Lambda_emb, tc.Lambda[gi(ParamGroup::PosEmb)]);
}

Eigen::MatrixXd ln_backward_factor(const PairKernel& G, double eps) {
  const int P = G.size();
  Eigen::VectorXd inv(P);
  for (int p = 0; p < P; ++p) {
    const double d = G.K(p, p) + eps;
    if (!(d > 0.0)) throw NumericError("ln_backward_factor", "nonpositive diagonal G + eps");
    inv(p) = 1.0 / std::sqrt(d);
  }
  Eigen::MatrixXd f = inv * inv.transpose();
  mirror_upper(f);
  return f;
}

// ---- MHSA -------------------------------------------------------------------

Eigen::MatrixXd mhsa_cumulative(const Eigen::MatrixXd& theta, const PairKernel& G,
                                const PairKernel& F, const AttnMoments& moments,
                                const TheoryConstants& tc, double eps) {
  const double CQ = tc.C[gi(ParamGroup::Q)], CK = tc.C[gi(ParamGroup::K)];
  const double CU = tc.C[gi(ParamGroup::U)], CV = tc.C[gi(ParamGroup::V)];
  const Eigen::MatrixXd ln = ln_backward_factor(G, eps).cwiseProduct(theta);
  // Value path: attention-weighted mixing of the suppressed kernel.
  Eigen::MatrixXd out = CU * CV * moments.contract_omega(ln);
  // Query/key path: softmax-derivative moments, leading contribution only.
  const Eigen::MatrixXd S = moments.contract_jacobian(F.K, F.K);
  const Eigen::MatrixXd R = moments.contract_jacobian(F.K, ln);
  out += CU * CV * CQ * CK * (S.cwiseProduct(ln) + F.K.cwiseProduct(R));
  mirror_upper(out);
  return out;
}

GroupKernels mhsa_additive(const PairKernel& F, const AttnMoments& moments,
                           const TheoryConstants& tc) {
  const double CQ = tc.C[gi(ParamGroup::Q)], CK = tc.C[gi(ParamGroup::K)];
  const double CU = tc.C[gi(ParamGroup::U)], CV = tc.C[gi(ParamGroup::V)];
  auto L = [&](ParamGroup g) { return tc.Lambda[gi(g)]; };
  const Eigen::MatrixXd mix = moments.contract_omega(F.K);
  const Eigen::MatrixXd dd = F.K.cwiseProduct(moments.contract_jacobian(F.K, F.K));
  GroupKernels a;
  set(a, ParamGroup::U, L(ParamGroup::U) * CV * mix);
  set(a, ParamGroup::V, L(ParamGroup::V) * CU * mix);
  set(a, ParamGroup::Q, L(ParamGroup::Q) * CU * CV * CK * dd);
  set(a, ParamGroup::K, L(ParamGroup::K) * CU * CV * CQ * dd);
  return a;
}

BlockNtk mhsa_ntk_step(const PairKernel& theta, const PairKernel& G, const PairKernel& F,
                       const AttnMoments& moments, const TheoryConstants& tc, double eps) {
  GroupKernels add = mhsa_additive(F, moments, tc);
  Eigen::MatrixXd out = theta.K + mhsa_cumulative(theta.K, G, F, moments, tc, eps) +
                        sum_groups(add, theta.size());
  mirror_upper(out);
  return {theta.with(std::move(out), KernelRole::Theta), std::move(add)};
}

// ---- MLP --------------------------------------------------------------------

Eigen::MatrixXd mlp_cumulative(const Eigen::MatrixXd& theta, const PairKernel& G,
                               const PairKernel& F, Activation act, const TheoryConstants& tc,
                               double eps, int order) {
  const double CW = tc.C[gi(ParamGroup::W)], CX = tc.C[gi(ParamGroup::X)];
  const ActFn d{act, true};
  const Eigen::MatrixXd dd = pair_expectation(F, CW, d, d, order);
  Eigen::MatrixXd out = CX * CW * dd.cwiseProduct(ln_backward_factor(G, eps)).cwiseProduct(theta);
  mirror_upper(out);
  return out;
}

GroupKernels mlp_additive(const PairKernel& F, Activation act, const TheoryConstants& tc,
                          int order) {
  const double CW = tc.C[gi(ParamGroup::W)], CX = tc.C[gi(ParamGroup::X)];
  const ActFn s{act, false}, d{act, true};
  GroupKernels a;
  set(a, ParamGroup::X, tc.Lambda[gi(ParamGroup::X)] * pair_expectation(F, CW, s, s, order));
  set(a, ParamGroup::W,
      tc.Lambda[gi(ParamGroup::W)] * CX * pair_expectation(F, CW, d, d, order).cwiseProduct(F.K));
  return a;
}

BlockNtk mlp_ntk_step(const PairKernel& theta, const PairKernel& G, const PairKernel& F,
                      Activation act, const TheoryConstants& tc, double eps, int order) {
  GroupKernels add = mlp_additive(F, act, tc, order);
  Eigen::MatrixXd out = theta.K + mlp_cumulative(theta.K, G, F, act, tc, eps, order) +
                        sum_groups(add, theta.size());
  mirror_upper(out);
  return {theta.with(std::move(out), KernelRole::Theta), std::move(add)};
}

// ---- head -------------------------------------------------------------------

Eigen::MatrixXd head_cumulative(const Eigen::MatrixXd& theta, const PairKernel& G,
                                const TheoryConstants& tc, double eps) {
  Eigen::MatrixXd out = tc.C_head * ln_backward_factor(G, eps).cwiseProduct(theta);
  mirror_upper(out);
  return out;
}

GroupKernels head_additive(const PairKernel& F, const TheoryConstants& tc, const ArchSpec& arch) {
  GroupKernels a;
  const Eigen::Index P = F.size();
  if (arch.tied_head()) {
    set(a, ParamGroup::WordEmb, tc.Lambda_head_w * F.K);
  } else {
    set(a, ParamGroup::HeadW, tc.Lambda_head_w * F.K);
    set(a, ParamGroup::HeadB, Eigen::MatrixXd::Constant(P, P, tc.Lambda_head_b));
  }
  return a;
}

BlockNtk head_ntk(const PairKernel& theta, const PairKernel& G, const PairKernel& F,
                  const TheoryConstants& tc, const ArchSpec& arch) {
  GroupKernels add = head_additive(F, tc, arch);
  Eigen::MatrixXd out = head_cumulative(theta.K, G, tc, arch.eps_ln) + sum_groups(add, theta.size());
  mirror_upper(out);
  return {theta.with(std::move(out), KernelRole::Theta), std::move(add)};
}

// ---- propagation ------------------------------------------------------------

NtkTrace propagate_ntk(const KernelTrace& kt, const ArchSpec& arch, const ScalingPlan& plan,
                       int order) {
  const TheoryConstants tc = theory_constants(plan, arch);
  const double eps = arch.eps_ln;
  if (kt.entries.size() != std::size_t(arch.depth()) + 3)
    throw InputError("propagate_ntk: kernel trace does not match the architecture");
  NtkTrace trace;

  const PairKernel& G0 = kt.entries[0].G;
  const Eigen::Index P = G0.size();
  NtkEntry stem;
  stem.label = "stem";
  stem.theta = stem_ntk(G0, tc.Lambda_emb, tc.Lambda[gi(ParamGroup::PosEmb)]);
  const ParamGroup emb = arch.modality == Modality::Vision ? ParamGroup::Patch : ParamGroup::WordEmb;
  set(stem.additive, emb, tc.Lambda_emb * G0.K);
  set(stem.additive, ParamGroup::PosEmb,
      tc.Lambda[gi(ParamGroup::PosEmb)] * token_delta(G0.samples, G0.T));
  stem.by_group = stem.additive;
  trace.entries.push_back(stem);

  for (int b = 0; b < arch.depth(); ++b) {
    const TraceEntry& in = kt.before_block(b);
    const NtkEntry& prev = trace.entries.back();
    NtkEntry e;
    e.label = kt.entries[2 + b].label;
    BlockNtk step;
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> cumulative;
    if (is_mhsa(arch.blocks[b])) {
      if (!kt.entries[2 + b].moments) throw InputError("propagate_ntk: attention moments missing");
      const AttnMoments& mom = *kt.entries[2 + b].moments;
      step = mhsa_ntk_step(prev.theta, in.G, *in.F, mom, tc, eps);
      cumulative = [&](const Eigen::MatrixXd& t) {
        return mhsa_cumulative(t, in.G, *in.F, mom, tc, eps);
      };
    } else {
      step = mlp_ntk_step(prev.theta, in.G, *in.F, arch.activation, tc, eps, order);
      const ActFn d{arch.activation, true};
      const Eigen::MatrixXd factor = tc.C[gi(ParamGroup::X)] * tc.C[gi(ParamGroup::W)] *
                                     pair_expectation(*in.F, tc.C[gi(ParamGroup::W)], d, d, order)
                                         .cwiseProduct(ln_backward_factor(in.G, eps));
      cumulative = [factor](const Eigen::MatrixXd& t) {
        Eigen::MatrixXd out = factor.cwiseProduct(t);
        mirror_upper(out);
        return out;
      };
    }
    e.theta = step.theta;
    e.additive = step.additive;
    for (int g = 0; g < kNumGroups; ++g) {
      const bool had = prev.by_group[g].size() > 0, adds = e.additive[g].size() > 0;
      if (!had && !adds) continue;
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(P, P);
      if (had) m += prev.by_group[g] + cumulative(prev.by_group[g]);
      if (adds) m += e.additive[g];
      mirror_upper(m);
      e.by_group[g] = std::move(m);
    }
    trace.entries.push_back(std::move(e));
  }

  const TraceEntry& last = kt.before_block(arch.depth());
  const NtkEntry& prev = trace.entries.back();
  BlockNtk h = head_ntk(prev.theta, last.G, *last.F, tc, arch);
  NtkEntry head;
  head.label = "head";
  head.theta = h.theta;
  head.additive = h.additive;
  for (int g = 0; g < kNumGroups; ++g) {
    const bool had = prev.by_group[g].size() > 0, adds = head.additive[g].size() > 0;
    if (!had && !adds) continue;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(P, P);
    if (had) m += head_cumulative(prev.by_group[g], last.G, tc, eps);
    if (adds) m += head.additive[g];
    mirror_upper(m);
    head.by_group[g] = std::move(m);
  }
  if (arch.pooling == Pooling::TokenMean) {
    trace.pooled = pool_tokens(head.theta);
    for (int g = 0; g < kNumGroups; ++g)
      if (head.by_group[g].size())
        trace.pooled_by_group[g] = pool_tokens(head.theta.with(head.by_group[g], KernelRole::Theta));
  }
  trace.entries.push_back(std::move(head));
  return trace;
}

NtkTrace propagate_ntk(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                       const PropagateOptions& options) {
  return propagate_ntk(propagate_kernels(arch, plan, inputs, options), arch, plan,
                       options.quadrature_order);
}

std::string ntk_trace_csv(const NtkTrace& trace) {
  std::ostringstream os;
  os << "block,label,pair1,pair2,theta,group,group_additive\n";
  char buf[80];
  for (std::size_t b = 0; b < trace.entries.size(); ++b) {
    const auto& e = trace.entries[b];
    for (int p = 0; p < e.theta.size(); ++p)
      for (int q = p; q < e.theta.size(); ++q) {
        bool any = false;
        for (ParamGroup g : kAllGroups) {
          if (e.additive[gi(g)].size() == 0) continue;
          any = true;
          std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g", e.theta.K(p, q),
                        std::string(to_string(g)).c_str(), e.additive[gi(g)](p, q));
          os << b << ',' << e.label << ',' << p << ',' << q << ',' << buf << '\n';
        }
        if (!any) {
          std::snprintf(buf, sizeof buf, "%.17g,,", e.theta.K(p, q));
          os << b << ',' << e.label << ',' << p << ',' << q << ',' << buf << '\n';
        }
      }
  }
  return os.str();
}

}  // namespace wf
