// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/transformer.hpp"

#include <cmath>
#include <string>

#include "wideformer/activation.hpp"
#include "wideformer/attention.hpp"

namespace wf {

namespace {

void check_finite(const Eigen::MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError(where, "non-finite activation");
}

std::string block_label(int b, BlockKind k) {
  return "block" + std::to_string(b + 1) + ":" + std::string(to_string(k));
}

// LN backward for stacked cotangents: rows c*T + t use token t's statistics.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& ds, const Eigen::MatrixXd& s,
                                    const Eigen::VectorXd& inv_std) {
  const Eigen::Index T = s.rows(), n = s.cols();
  Eigen::MatrixXd dz(ds.rows(), n);
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    const Eigen::Index t = r % T;
    const double mean_ds = ds.row(r).sum() / double(n);
    const double mean_dss = ds.row(r).dot(s.row(t)) / double(n);
    dz.row(r) = inv_std(t) * (ds.row(r).array() - mean_ds - s.row(t).array() * mean_dss).matrix();
  }
  return dz;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& m, int copies) {
  return m.replicate(copies, 1);
}

}  // namespace

Eigen::MatrixXd layer_norm_rows(const Eigen::MatrixXd& z, double eps, Eigen::VectorXd& inv_std) {
  const Eigen::Index n = z.cols();
  Eigen::MatrixXd s(z.rows(), n);
  inv_std.resize(z.rows());
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    const double mu = z.row(t).sum() / double(n);
    const Eigen::RowVectorXd c = z.row(t).array() - mu;
    const double var = c.squaredNorm() / double(n);
    inv_std(t) = 1.0 / std::sqrt(var + eps);
    s.row(t) = c * inv_std(t);
  }
  return s;
}

SampleTrace forward_sample(const ModelParams& P, const Inputs& inputs, int alpha) {
  const ArchSpec& arch = P.arch;
  const int T = arch.T, H = arch.H, C = arch.C();
  SampleTrace tr;
  Eigen::MatrixXd z;
  if (arch.modality == Modality::Vision) {
    tr.x = inputs.patches[alpha];
    z = tr.x * P.embed.transpose() + P.pos;
  } else {
    z.resize(T, arch.n);
    for (int t = 0; t < T; ++t) z.row(t) = P.embed.col(inputs.tokens[alpha][t]).transpose() + P.pos.row(t);
  }
  check_finite(z, "stem");
  tr.z.push_back(z);
  const double inv_sqrt_c = 1.0 / std::sqrt(double(C));

  for (int b = 0; b <= arch.depth(); ++b) {
    Eigen::VectorXd inv;
    tr.s.push_back(layer_norm_rows(tr.z.back(), arch.eps_ln, inv));
    tr.inv_std.push_back(inv);
    if (b == arch.depth()) break;
    const Eigen::MatrixXd& s = tr.s.back();
    const BlockParams& bp = P.blocks[b];
    BlockCache cache;
    Eigen::MatrixXd r;
    if (is_mhsa(bp.kind)) {
      cache.q = s * bp.Q.transpose();
      cache.k = s * bp.K.transpose();
      cache.v = s * bp.V.transpose();
      cache.o.resize(T, arch.n);
      for (int h = 0; h < H; ++h) {
        Eigen::MatrixXd logits =
            cache.q.middleCols(h * C, C) * cache.k.middleCols(h * C, C).transpose() * inv_sqrt_c;
        Eigen::MatrixXd om = softmax_rows(logits, bp.kind == BlockKind::MhsaMasked);
        cache.o.middleCols(h * C, C) = om * cache.v.middleCols(h * C, C);
        cache.logits.push_back(std::move(logits));
        cache.omega.push_back(std::move(om));
      }
      r = cache.o * bp.U.transpose();
    } else {
      cache.w = s * bp.W.transpose();
      cache.a = cache.w.unaryExpr([&](double x) { return activate(arch.activation, x); });
      r = cache.a * bp.X.transpose();
    }
    Eigen::MatrixXd next = tr.z.back() + r;
    check_finite(next, block_label(b, bp.kind));
    tr.blocks.push_back(std::move(cache));
    tr.z.push_back(std::move(next));
  }
  const Eigen::MatrixXd& sL = tr.s.back();
  if (arch.tied_head()) {
    tr.f = P.n_rescale * (sL * P.embed);
  } else {
    tr.f = sL * P.head_w.transpose();
    tr.f.rowwise() += P.head_b.transpose();
  }
  check_finite(tr.f, "head");
  if (arch.pooling == Pooling::TokenMean) tr.pooled = tr.f.colwise().mean();
  return tr;
}

ForwardTrace forward_pass(const ModelParams& params, const Inputs& inputs) {
  inputs.check(params.arch);
  ForwardTrace out;
  for (int a = 0; a < inputs.samples(); ++a) out.samples.push_back(forward_sample(params, inputs, a));
  return out;
}

Signals backward_sample(const ModelParams& P, const SampleTrace& tr, const Eigen::MatrixXd& cot) {
  const ArchSpec& arch = P.arch;
  const int T = arch.T, H = arch.H, C = arch.C();
  if (cot.rows() % T != 0 || cot.cols() != tr.f.cols())
    throw InputError("backward_sample: cotangent shape mismatch");
  const int Kc = int(cot.rows() / T);
  Signals sig;
  sig.cotangents = Kc;
  sig.df = cot;
  sig.blocks.resize(arch.depth());

  Eigen::MatrixXd ds = arch.tied_head() ? Eigen::MatrixXd(P.n_rescale * (cot * P.embed.transpose()))
                                        : Eigen::MatrixXd(cot * P.head_w);
  Eigen::MatrixXd dz = layer_norm_backward(ds, tr.s[arch.depth()], tr.inv_std[arch.depth()]);
  const double inv_sqrt_c = 1.0 / std::sqrt(double(C));

  for (int b = arch.depth() - 1; b >= 0; --b) {
    const BlockParams& bp = P.blocks[b];
    const BlockCache& cache = tr.blocks[b];
    BlockSignals& bs = sig.blocks[b];
    bs.dr = dz;
    if (is_mhsa(bp.kind)) {
      const Eigen::MatrixXd dO = dz * bp.U;
      bs.dq.resize(dz.rows(), arch.n);
      bs.dk.resize(dz.rows(), arch.n);
      bs.dv.resize(dz.rows(), arch.n);
      for (int c = 0; c < Kc; ++c) {
        for (int h = 0; h < H; ++h) {
          const auto dOh = dO.block(c * T, h * C, T, C);
          const Eigen::MatrixXd& om = cache.omega[h];
          const auto vh = cache.v.middleCols(h * C, C);
          const Eigen::MatrixXd dOm = dOh * vh.transpose();
          bs.dv.block(c * T, h * C, T, C) = om.transpose() * dOh;
          Eigen::MatrixXd dL(T, T);
          for (int t = 0; t < T; ++t) {
            const double dot = dOm.row(t).dot(om.row(t));
            dL.row(t) = om.row(t).array() * (dOm.row(t).array() - dot);
          }
          bs.dq.block(c * T, h * C, T, C) = dL * cache.k.middleCols(h * C, C) * inv_sqrt_c;
          bs.dk.block(c * T, h * C, T, C) = dL.transpose() * cache.q.middleCols(h * C, C) * inv_sqrt_c;
        }
      }
      ds = bs.dq * bp.Q + bs.dk * bp.K + bs.dv * bp.V;
    } else {
      const Eigen::MatrixXd da = dz * bp.X;
      const Eigen::MatrixXd dsig =
          stack(cache.w.unaryExpr([&](double x) { return activate_deriv(arch.activation, x); }), Kc);
      bs.dw = da.cwiseProduct(dsig);
      ds = bs.dw * bp.W;
    }
    dz += layer_norm_backward(ds, tr.s[b], tr.inv_std[b]);
  }
  sig.dz1 = dz;
  if (!sig.dz1.allFinite()) throw NumericError("backward", "non-finite gradient");
  return sig;
}

void accumulate_gradient(const ModelParams& P, const Inputs& inputs, int alpha,
                         const SampleTrace& tr, const Signals& sig, int c, ModelParams& grad) {
  const ArchSpec& arch = P.arch;
  const int T = arch.T;
  const int first = c < 0 ? 0 : c, last = c < 0 ? sig.cotangents : c + 1;
  for (int k = first; k < last; ++k) {
    const auto rows = [&](const Eigen::MatrixXd& m) { return m.middleRows(k * T, T); };
    const auto dz1 = rows(sig.dz1);
    if (arch.modality == Modality::Vision) {
      grad.embed.noalias() += dz1.transpose() * tr.x;
    } else {
      for (int t = 0; t < T; ++t) grad.embed.col(inputs.tokens[alpha][t]) += dz1.row(t).transpose();
    }
    grad.pos += dz1;
    for (int b = 0; b < arch.depth(); ++b) {
      const BlockSignals& bs = sig.blocks[b];
      const BlockCache& cache = tr.blocks[b];
      BlockParams& g = grad.blocks[b];
      const Eigen::MatrixXd& s = tr.s[b];
      if (is_mhsa(g.kind)) {
        g.Q.noalias() += rows(bs.dq).transpose() * s;
        g.K.noalias() += rows(bs.dk).transpose() * s;
        g.V.noalias() += rows(bs.dv).transpose() * s;
        g.U.noalias() += rows(bs.dr).transpose() * cache.o;
      } else {
        g.W.noalias() += rows(bs.dw).transpose() * s;
        g.X.noalias() += rows(bs.dr).transpose() * cache.a;
      }
    }
    const auto df = rows(sig.df);
    const Eigen::MatrixXd& sL = tr.s[arch.depth()];
    if (arch.tied_head()) {
      grad.embed.noalias() += P.n_rescale * (sL.transpose() * df);
    } else {
      grad.head_w.noalias() += df.transpose() * sL;
      grad.head_b += df.colwise().sum().transpose();
    }
  }
}

ModelParams vjp(const ModelParams& params, const Inputs& inputs,
                const std::vector<Eigen::MatrixXd>& cotangents) {
  if (int(cotangents.size()) != inputs.samples()) throw InputError("vjp: one cotangent per sample required");
  ModelParams grad = params.zeros_like();
  for (int a = 0; a < inputs.samples(); ++a) {
    const SampleTrace tr = forward_sample(params, inputs, a);
    const Signals sig = backward_sample(params, tr, cotangents[a]);
    accumulate_gradient(params, inputs, a, tr, sig, -1, grad);
  }
  return grad;
}

std::vector<ModelParams> output_jacobian(const ModelParams& params, const Inputs& inputs,
                                         const std::vector<OutputIndex>& selector) {
  inputs.check(params.arch);
  const int T = params.arch.T, out_dim = params.arch.output_dim();
  std::vector<ModelParams> result;
  result.reserve(selector.size());
  std::vector<SampleTrace> traces;
  for (int a = 0; a < inputs.samples(); ++a) traces.push_back(forward_sample(params, inputs, a));
  for (const OutputIndex& o : selector) {
    if (o.alpha < 0 || o.alpha >= inputs.samples() || o.i < 0 || o.i >= out_dim || o.t >= T)
      throw InputError("output_jacobian: selector out of range");
    Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(T, out_dim);
    if (o.t < 0)
      cot.col(o.i).setConstant(1.0 / T);
    else
      cot(o.t, o.i) = 1.0;
    ModelParams grad = params.zeros_like();
    const Signals sig = backward_sample(params, traces[o.alpha], cot);
    accumulate_gradient(params, inputs, o.alpha, traces[o.alpha], sig, 0, grad);
    bool finite = true;
    grad.for_each([&](ParamGroup, Eigen::Ref<const Eigen::MatrixXd> m) { finite = finite && m.allFinite(); });
    if (!finite) throw NumericError("output_jacobian", "non-finite gradient");
    result.push_back(std::move(grad));
  }
  return result;
}

}  // namespace wf
