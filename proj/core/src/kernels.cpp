// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace wf {

namespace {

void require_finite(const Eigen::MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError(where, "non-finite kernel entry");
}

}  // namespace

PairKernel input_kernel(const Inputs& inputs) {
  const int S = inputs.samples();
  if (S == 0) throw InputError("input_kernel: empty batch");
  const int T = inputs.T();
  PairKernel G = PairKernel::zeros(S, T, KernelRole::G);
  if (inputs.modality == Modality::Vision) {
    const Eigen::Index n_patch = inputs.patches[0].cols();
    Eigen::MatrixXd X(S * T, n_patch);
    for (int a = 0; a < S; ++a) X.middleRows(a * T, T) = inputs.patches[a];
    G.K = X * X.transpose() / double(n_patch);
    mirror_upper(G.K);
  } else {
    for (int p = 0; p < S * T; ++p)
      for (int q = 0; q < S * T; ++q)
        G.K(p, q) = inputs.tokens[p / T][p % T] == inputs.tokens[q / T][q % T] ? 1.0 : 0.0;
  }
  return G;
}

PairKernel stem_kernel(const PairKernel& G0, double C_emb, double C_PE) {
  PairKernel G = G0.with(C_emb * G0.K, KernelRole::G);
  for (int p = 0; p < G.size(); ++p)
    for (int q = 0; q < G.size(); ++q)
      if (p % G.T == q % G.T) G.K(p, q) += C_PE;
  return G;
}

PairKernel layer_norm_kernel(const PairKernel& G, double eps) {
  const int P = G.size();
  Eigen::VectorXd inv(P);
  for (int p = 0; p < P; ++p) {
    const double d = G.K(p, p) + eps;
    if (!(d > 0.0)) throw NumericError("layer_norm_kernel", "nonpositive diagonal G + eps");
    inv(p) = 1.0 / std::sqrt(d);
  }
  Eigen::MatrixXd F = inv.asDiagonal() * G.K * inv.asDiagonal();
  mirror_upper(F);
  return G.with(std::move(F), KernelRole::F);
}

PairKernel mhsa_kernel_step(const PairKernel& G, const PairKernel& F, double C_U, double C_V,
                            const AttnMoments& moments) {
  if (moments.omega_omega.size() == 0 || moments.omega_omega_se.size() == 0)
    throw InputError("mhsa_kernel_step: attention moments or standard errors missing");
  if (moments.samples != G.samples || moments.T != G.T)
    throw InputError("mhsa_kernel_step: moments do not match the kernel's pair set");
  Eigen::MatrixXd out = G.K + C_U * C_V * moments.contract_omega(F.K);
  mirror_upper(out);
  require_finite(out, "mhsa_kernel_step");
  return G.with(std::move(out), KernelRole::G);
}

Eigen::MatrixXd pair_expectation(const PairKernel& F, double scale, const ActFn& f,
                                 const ActFn& g, int order) {
  const int P = F.size();
  Eigen::MatrixXd out(P, P);
  for (int p = 0; p < P; ++p)
    for (int q = p; q < P; ++q)
      out(p, q) = gauss_pair_expect(f, g, scale * F.K(p, p), scale * F.K(p, q),
                                    scale * F.K(q, q), order);
  mirror_upper(out);
  return out;
}

PairKernel mlp_kernel_step(const PairKernel& G, const PairKernel& F, double C_W, double C_X,
                           Activation activation, int order) {
  if (C_X == 0.0) return G;
  const ActFn s{activation, false};
  Eigen::MatrixXd out = G.K + C_X * pair_expectation(F, C_W, s, s, order);
  mirror_upper(out);
  require_finite(out, "mlp_kernel_step");
  return G.with(std::move(out), KernelRole::G);
}

Eigen::MatrixXd pool_tokens(const PairKernel& K) {
  const int S = K.samples, T = K.T;
  Eigen::MatrixXd out(S, S);
  for (int a = 0; a < S; ++a)
    for (int b = 0; b < S; ++b) out(a, b) = K.K.block(a * T, b * T, T, T).sum() / double(T * T);
  return out;
}

HeadKernel head_kernel(const PairKernel& F, double C, Pooling pooling) {
  HeadKernel h{F.with(C * F.K, KernelRole::G), {}};
  if (pooling == Pooling::TokenMean) h.pooled = pool_tokens(h.G);
  return h;
}

KernelTrace propagate_kernels(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                              const PropagateOptions& options) {
  arch.validate();
  inputs.check(arch);
  const TheoryConstants tc = theory_constants(plan, arch);
  auto C = [&](ParamGroup g) { return tc.C[gi(g)]; };

  KernelTrace trace;
  PairKernel G0 = input_kernel(inputs);
  trace.entries.push_back({"input", G0, std::nullopt, nullptr});
  PairKernel G = stem_kernel(G0, tc.C_emb, C(ParamGroup::PosEmb));
  PairKernel F = layer_norm_kernel(G, arch.eps_ln);
  trace.entries.push_back({"stem", G, F, nullptr});

  for (int b = 0; b < arch.depth(); ++b) {
    const BlockKind kind = arch.blocks[b];
    const std::string label = "block" + std::to_string(b + 1) + ":" + std::string(to_string(kind));
    std::shared_ptr<const AttnMoments> mom;
    if (is_mhsa(kind)) {
      const AttnKernel A = qk_covariance(F, C(ParamGroup::Q), C(ParamGroup::K));
      mom = std::make_shared<const AttnMoments>(attention_moments(
          A, kind == BlockKind::MhsaMasked, options.attention_samples, options.seed, b));
      G = mhsa_kernel_step(G, F, C(ParamGroup::U), C(ParamGroup::V), *mom);
    } else {
      G = mlp_kernel_step(G, F, C(ParamGroup::W), C(ParamGroup::X), arch.activation,
                          options.quadrature_order);
    }
    F = layer_norm_kernel(G, arch.eps_ln);
    trace.entries.push_back({label, G, F, mom});
  }
  HeadKernel h = head_kernel(F, tc.C_head, arch.pooling);
  trace.entries.push_back({"head", h.G, std::nullopt, nullptr});
  trace.pooled = h.pooled;
  return trace;
}

std::string kernel_trace_csv(const KernelTrace& trace) {
  std::ostringstream os;
  os << "block,label,pair1,pair2,G,F\n";
  char buf[64];
  for (std::size_t b = 0; b < trace.entries.size(); ++b) {
    const auto& e = trace.entries[b];
    for (int p = 0; p < e.G.size(); ++p)
      for (int q = p; q < e.G.size(); ++q) {
        os << b << ',' << e.label << ',' << p << ',' << q << ',';
        std::snprintf(buf, sizeof buf, "%.17g", e.G.K(p, q));
        os << buf << ',';
        if (e.F) {
          std::snprintf(buf, sizeof buf, "%.17g", e.F->K(p, q));
          os << buf;
        }
        os << '\n';
      }
  }
  return os.str();
}

}  // namespace wf
