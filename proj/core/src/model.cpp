// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/model.hpp"

#include <cmath>

#include "wideformer/rng.hpp"

namespace wf {

namespace {

Eigen::MatrixXd draw(Eigen::Index rows, Eigen::Index cols, double var, Distribution dist,
                     std::uint64_t seed, std::uint64_t index) {
  Eigen::MatrixXd m(rows, cols);
  if (var == 0.0) return m.setZero();
  auto gen = rng_stream(seed, Purpose::Init, index);
  const double sd = std::sqrt(var);
  if (dist == Distribution::Normal) {
    std::normal_distribution<double> nd(0.0, sd);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
  } else {
    const double half = std::sqrt(3.0) * sd;
    std::uniform_real_distribution<double> ud(-half, half);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = ud(gen);
  }
  return m;
}

std::uint64_t tensor_index(int block, ParamGroup g) { return std::uint64_t(block + 1) * 16 + gi(g); }

}  // namespace

ModelParams init_model(const ArchSpec& arch, const ScalingPlan& plan, std::uint64_t seed,
                       Distribution dist) {
  arch.validate();
  if (plan.dims != Dims::of(arch)) throw InputError("init_model: plan was built for another architecture");
  ModelParams p;
  p.arch = arch;
  p.dist = dist;
  p.seed = seed;
  p.n_rescale = plan.rescale();
  const int n = arch.n, Mn = arch.M * arch.n;
  auto var = [&](ParamGroup g) { return plan.init_var(g); };
  const ParamGroup emb = arch.modality == Modality::Vision ? ParamGroup::Patch : ParamGroup::WordEmb;
  p.embed = draw(n, arch.n_in, var(emb), dist, seed, tensor_index(-1, emb));
  p.pos = draw(arch.T, n, var(ParamGroup::PosEmb), dist, seed, tensor_index(-1, ParamGroup::PosEmb));
  for (int b = 0; b < arch.depth(); ++b) {
    BlockParams bp;
    bp.kind = arch.blocks[b];
    if (is_mhsa(bp.kind)) {
      bp.Q = draw(n, n, var(ParamGroup::Q), dist, seed, tensor_index(b, ParamGroup::Q));
      bp.K = draw(n, n, var(ParamGroup::K), dist, seed, tensor_index(b, ParamGroup::K));
      bp.V = draw(n, n, var(ParamGroup::V), dist, seed, tensor_index(b, ParamGroup::V));
      bp.U = draw(n, n, var(ParamGroup::U), dist, seed, tensor_index(b, ParamGroup::U));
    } else {
      bp.W = draw(Mn, n, var(ParamGroup::W), dist, seed, tensor_index(b, ParamGroup::W));
      bp.X = draw(n, Mn, var(ParamGroup::X), dist, seed, tensor_index(b, ParamGroup::X));
    }
    p.blocks.push_back(std::move(bp));
  }
  if (!arch.tied_head()) {
    p.head_w = draw(arch.n_out, n, var(ParamGroup::HeadW), dist, seed,
                    tensor_index(arch.depth(), ParamGroup::HeadW));
    p.head_b = Eigen::VectorXd::Zero(arch.n_out);
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each([](ParamGroup, Eigen::Ref<Eigen::MatrixXd> m) { m.setZero(); });
  return z;
}

void ModelParams::for_each(const std::function<void(ParamGroup, Eigen::Ref<Eigen::MatrixXd>)>& fn) {
  fn(arch.modality == Modality::Vision ? ParamGroup::Patch : ParamGroup::WordEmb, embed);
  fn(ParamGroup::PosEmb, pos);
  for (auto& b : blocks) {
    if (is_mhsa(b.kind)) {
      fn(ParamGroup::Q, b.Q);
      fn(ParamGroup::K, b.K);
      fn(ParamGroup::V, b.V);
      fn(ParamGroup::U, b.U);
    } else {
      fn(ParamGroup::W, b.W);
      fn(ParamGroup::X, b.X);
    }
  }
  if (!arch.tied_head()) {
    fn(ParamGroup::HeadW, head_w);
    Eigen::Map<Eigen::MatrixXd> hb(head_b.data(), head_b.size(), 1);
    fn(ParamGroup::HeadB, hb);
  }
}

void ModelParams::for_each(
    const std::function<void(ParamGroup, Eigen::Ref<const Eigen::MatrixXd>)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&](ParamGroup g, Eigen::Ref<Eigen::MatrixXd> m) { fn(g, m); });
}

}  // namespace wf
