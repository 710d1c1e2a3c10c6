// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/lab.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "wideformer/parallel.hpp"
#include "wideformer/rng.hpp"

namespace wf {

// ---- statistics -------------------------------------------------------------

void MatrixStat::add(const Eigen::MatrixXd& v) {
  if (n_ == 0) {
    sum_ = Eigen::MatrixXd::Zero(v.rows(), v.cols());
    sumsq_ = sum_;
  }
  sum_ += v;
  sumsq_ += v.cwiseProduct(v);
  ++n_;
}

Eigen::MatrixXd MatrixStat::mean() const { return sum_ / double(n_); }

Eigen::MatrixXd MatrixStat::se() const {
  if (n_ < 2) return Eigen::MatrixXd::Constant(sum_.rows(), sum_.cols(), std::numeric_limits<double>::infinity());
  const Eigen::MatrixXd m = mean();
  const Eigen::ArrayXXd var = (sumsq_ / double(n_) - m.cwiseProduct(m)).array().max(0.0) * (double(n_) / (n_ - 1));
  return (var / double(n_)).sqrt().matrix();
}

double ScalarStat::se() const {
  if (n < 2) return std::numeric_limits<double>::infinity();
  const double m = mean();
  const double var = std::max(0.0, sumsq / n - m * m) * (double(n) / (n - 1));
  return std::sqrt(var / n);
}

namespace {

// Runs per-init work in parallel chunks and reduces results in init order.
template <typename R, typename Work, typename Reduce>
void over_inits(long n_inits, Work&& work, Reduce&& reduce) {
  const long chunk = std::max<long>(1, thread_count());
  for (long start = 0; start < n_inits; start += chunk) {
    const long count = std::min(chunk, n_inits - start);
    std::vector<std::optional<R>> out(count);
    parallel_for(count, [&](long i) { out[i].emplace(work(start + i)); });
    for (auto& r : out) reduce(*r);
  }
}

ModelParams init_for(const ArchSpec& arch, const ScalingPlan& plan, const McOptions& opt, long k) {
  return init_model(arch, plan, init_seed(opt.seed, std::uint64_t(k)), opt.dist);
}

void check_inits(const McOptions& opt) {
  if (opt.n_inits < 1) throw InputError("n_inits must be positive");
}

Eigen::MatrixXd stacked(const std::vector<SampleTrace>& traces, const std::function<const Eigen::MatrixXd&(const SampleTrace&)>& get) {
  const Eigen::Index T = get(traces[0]).rows(), cols = get(traces[0]).cols();
  Eigen::MatrixXd out(T * Eigen::Index(traces.size()), cols);
  for (std::size_t a = 0; a < traces.size(); ++a) out.middleRows(Eigen::Index(a) * T, T) = get(traces[a]);
  return out;
}

// Column-rotated copy: channel i paired with channel i+1.
Eigen::MatrixXd rotate_cols(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd r(m.rows(), m.cols());
  const Eigen::Index c = m.cols();
  r.leftCols(c - 1) = m.rightCols(c - 1);
  r.col(c - 1) = m.col(0);
  return r;
}

Eigen::MatrixXd select_cols(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
  Eigen::MatrixXd out(m.rows(), Eigen::Index(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(Eigen::Index(j)) = m.col(cols[j]);
  return out;
}

Eigen::MatrixXd pool_rows(const Eigen::MatrixXd& m, int T) {
  const Eigen::Index S = m.rows() / T;
  Eigen::MatrixXd out(S, m.cols());
  for (Eigen::Index a = 0; a < S; ++a) out.row(a) = m.middleRows(a * T, T).colwise().mean();
  return out;
}

}  // namespace

// ---- kernels ----------------------------------------------------------------

std::vector<McSummary> empirical_kernel(const ArchSpec& arch, const ScalingPlan& plan,
                                        const Inputs& inputs, const McOptions& opt) {
  check_inits(opt);
  inputs.check(arch);
  const std::vector<int> channels = contact_free_channels(arch, inputs, opt.channels);
  const int positions = arch.depth() + 1;
  const bool pooled = arch.pooling == Pooling::TokenMean;
  const int slots = positions + 1 + (pooled ? 1 : 0);
  std::vector<MatrixStat> val(slots), off(slots);

  struct Result { std::vector<Eigen::MatrixXd> v, o; };
  over_inits<Result>(opt.n_inits, [&](long k) {
    const ModelParams P = init_for(arch, plan, opt, k);
    const ForwardTrace ft = forward_pass(P, inputs);
    Result r;
    for (int pos = 0; pos < positions; ++pos) {
      const Eigen::MatrixXd Z = stacked(ft.samples, [pos](const SampleTrace& s) -> const Eigen::MatrixXd& { return s.z[pos]; });
      r.v.push_back(Z * Z.transpose() / double(Z.cols()));
      r.o.push_back(Z * rotate_cols(Z).transpose() / double(Z.cols()));
    }
    const Eigen::MatrixXd Fall = stacked(ft.samples, [](const SampleTrace& s) -> const Eigen::MatrixXd& { return s.f; });
    const Eigen::MatrixXd Fs = select_cols(Fall, channels);
    r.v.push_back(Fs * Fs.transpose() / double(Fs.cols()));
    r.o.push_back(Fs * rotate_cols(Fs).transpose() / double(Fs.cols()));
    if (pooled) {
      const Eigen::MatrixXd Fp = pool_rows(Fs, arch.T);
      r.v.push_back(Fp * Fp.transpose() / double(Fp.cols()));
      r.o.push_back(Fp * rotate_cols(Fp).transpose() / double(Fp.cols()));
    }
    return r;
  }, [&](const Result& r) {
    for (int i = 0; i < slots; ++i) {
      val[i].add(r.v[i]);
      off[i].add(r.o[i]);
    }
  });

  std::vector<McSummary> out;
  for (int i = 0; i < slots; ++i) {
    McSummary m;
    if (i == 0) m.label = "stem";
    else if (i < positions) m.label = "block" + std::to_string(i) + ":" + std::string(to_string(arch.blocks[i - 1]));
    else if (i == positions) m.label = "head";
    else m.label = "head:pooled";
    m.mean = val[i].mean();
    m.se = val[i].se();
    m.off_mean = off[i].mean();
    m.off_se = off[i].se();
    m.n_inits = opt.n_inits;
    out.push_back(std::move(m));
  }
  return out;
}

// ---- NTK ----------------------------------------------------------------------

namespace {

// Gram of per-cotangent gradients of a linear map y = x M^T used on every
// token: <g_a, g_b> = sum_{t,t'} (dY_a dY_b^T)[t,t'] * PX[(alpha_a,t),(alpha_b,t')].
Eigen::MatrixXd linear_gram(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& PX,
                            const std::vector<int>& owner, int T) {
  const Eigen::MatrixXd PY = Y * Y.transpose();
  const int K = int(owner.size());
  Eigen::MatrixXd G(K, K);
  for (int a = 0; a < K; ++a)
    for (int b = a; b < K; ++b) {
      const auto py = PY.block(a * T, b * T, T, T);
      const auto px = PX.block(owner[a] * T, owner[b] * T, T, T);
      G(a, b) = G(b, a) = py.cwiseProduct(px).sum();
    }
  return G;
}

}  // namespace

NtkSample ntk_single_init(const ModelParams& P, const ScalingPlan& plan, const Inputs& inputs,
                          const std::vector<int>& channels) {
  const ArchSpec& arch = P.arch;
  const int S = inputs.samples(), T = arch.T, kc = int(channels.size()), depth = arch.depth();
  const bool pooled = arch.pooling == Pooling::TokenMean;
  const int out_dim = arch.output_dim();
  const int per_sample = pooled ? kc : T * kc;
  const int K = S * per_sample;

  std::vector<SampleTrace> traces;
  std::vector<Signals> sigs;
  std::vector<int> owner;
  for (int a = 0; a < S; ++a) {
    traces.push_back(forward_sample(P, inputs, a));
    Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(per_sample * T, out_dim);
    for (int c = 0; c < per_sample; ++c) {
      const int ci = c % kc, t = c / kc;
      if (pooled)
        cot.block(c * T, channels[ci], T, 1).setConstant(1.0 / T);
      else
        cot(c * T + t, channels[ci]) = 1.0;
      owner.push_back(a);
    }
    sigs.push_back(backward_sample(P, traces.back(), cot));
  }
  auto gather = [&](const std::function<const Eigen::MatrixXd&(const Signals&)>& get) {
    Eigen::MatrixXd Y(Eigen::Index(K) * T, get(sigs[0]).cols());
    for (int a = 0; a < S; ++a) Y.middleRows(Eigen::Index(a) * per_sample * T, per_sample * T) = get(sigs[a]);
    return Y;
  };
  auto inputs_of = [&](const std::function<Eigen::MatrixXd(const SampleTrace&)>& get) {
    Eigen::MatrixXd X;
    for (int a = 0; a < S; ++a) {
      const Eigen::MatrixXd x = get(traces[a]);
      if (a == 0) X.resize(Eigen::Index(S) * T, x.cols());
      X.middleRows(Eigen::Index(a) * T, T) = x;
    }
    return Eigen::MatrixXd(X * X.transpose());
  };

  GroupKernels gram;
  auto add = [&](ParamGroup g, const Eigen::MatrixXd& m) {
    const double lam = plan.sgd(g);
    if (gram[gi(g)].size() == 0) gram[gi(g)] = Eigen::MatrixXd::Zero(K, K);
    gram[gi(g)] += lam * m;
  };

  // Stem.
  const Eigen::MatrixXd Ydz1 = gather([](const Signals& s) -> const Eigen::MatrixXd& { return s.dz1; });
  Eigen::MatrixXd PXpos = Eigen::MatrixXd::Zero(S * T, S * T);
  for (int p = 0; p < S * T; ++p)
    for (int q = 0; q < S * T; ++q) PXpos(p, q) = (p % T == q % T) ? 1.0 : 0.0;
  add(ParamGroup::PosEmb, linear_gram(Ydz1, PXpos, owner, T));
  if (arch.modality == Modality::Vision) {
    add(ParamGroup::Patch, linear_gram(Ydz1, inputs_of([](const SampleTrace& s) { return s.x; }), owner, T));
  } else {
    // Tied embedding: materialize stem + head gradients so the cross term
    // between them is included exactly.
    Eigen::MatrixXd flat(Eigen::Index(arch.n) * arch.n_in, K);
    for (int kk = 0; kk < K; ++kk) {
      const int a = owner[kk], c = kk - a * per_sample;
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(arch.n, arch.n_in);
      const auto dz = sigs[a].dz1.middleRows(c * T, T);
      for (int t = 0; t < T; ++t) g.col(inputs.tokens[a][t]) += dz.row(t).transpose();
      if (arch.tied_head())
        g.noalias() += P.n_rescale * (traces[a].s[depth].transpose() * sigs[a].df.middleRows(c * T, T));
      flat.col(kk) = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    }
    add(ParamGroup::WordEmb, flat.transpose() * flat);
  }
  // Residual blocks.
  for (int b = 0; b < depth; ++b) {
    const Eigen::MatrixXd PXs = inputs_of([b](const SampleTrace& s) { return s.s[b]; });
    if (is_mhsa(arch.blocks[b])) {
      add(ParamGroup::Q, linear_gram(gather([b](const Signals& s) -> const Eigen::MatrixXd& { return s.blocks[b].dq; }), PXs, owner, T));
      add(ParamGroup::K, linear_gram(gather([b](const Signals& s) -> const Eigen::MatrixXd& { return s.blocks[b].dk; }), PXs, owner, T));
      add(ParamGroup::V, linear_gram(gather([b](const Signals& s) -> const Eigen::MatrixXd& { return s.blocks[b].dv; }), PXs, owner, T));
      add(ParamGroup::U, linear_gram(gather([b](const Signals& s) -> const Eigen::MatrixXd& { return s.blocks[b].dr; }),
                                     inputs_of([b](const SampleTrace& s) { return s.blocks[b].o; }), owner, T));
    } else {
      add(ParamGroup::W, linear_gram(gather([b](const Signals& s) -> const Eigen::MatrixXd& { return s.blocks[b].dw; }), PXs, owner, T));
      add(ParamGroup::X, linear_gram(gather([b](const Signals& s) -> const Eigen::MatrixXd& { return s.blocks[b].dr; }),
                                     inputs_of([b](const SampleTrace& s) { return s.blocks[b].a; }), owner, T));
    }
  }
  // Untied head.
  if (!arch.tied_head()) {
    const Eigen::MatrixXd Ydf = gather([](const Signals& s) -> const Eigen::MatrixXd& { return s.df; });
    add(ParamGroup::HeadW, linear_gram(Ydf, inputs_of([depth](const SampleTrace& s) { return s.s[depth]; }), owner, T));
    add(ParamGroup::HeadB, linear_gram(Ydf, Eigen::MatrixXd::Ones(S * T, S * T), owner, T));
  }

  // Channel averaging: cotangent index a*per_sample + c, c = t*kc + ci.
  const int pairs = pooled ? S : S * T;
  auto reduce = [&](const Eigen::MatrixXd& g, int shift) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(pairs, pairs);
    for (int p = 0; p < pairs; ++p)
      for (int q = 0; q < pairs; ++q) {
        double acc = 0;
        for (int ci = 0; ci < kc; ++ci) {
          const int cj = (ci + shift) % kc;
          const int ia = pooled ? p * kc + ci : (p / T) * per_sample + (p % T) * kc + ci;
          const int ib = pooled ? q * kc + cj : (q / T) * per_sample + (q % T) * kc + cj;
          acc += g(ia, ib);
        }
        out(p, q) = acc / kc;
      }
    return out;
  };
  NtkSample r;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(K, K);
  for (int g = 0; g < kNumGroups; ++g) {
    if (gram[g].size() == 0) continue;
    total += gram[g];
    r.by_group[g] = reduce(gram[g], 0);
  }
  r.theta = reduce(total, 0);
  r.cross = kc > 1 ? reduce(total, 1) : Eigen::MatrixXd::Zero(pairs, pairs);
  return r;
}

McSummary empirical_ntk(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                        const McOptions& opt) {
  check_inits(opt);
  inputs.check(arch);
  const std::vector<int> channels = contact_free_channels(arch, inputs, opt.channels);
  MatrixStat total, cross;
  std::array<MatrixStat, kNumGroups> groups;
  over_inits<NtkSample>(opt.n_inits, [&](long k) {
    return ntk_single_init(init_for(arch, plan, opt, k), plan, inputs, channels);
  }, [&](const NtkSample& s) {
    total.add(s.theta);
    cross.add(s.cross);
    for (int g = 0; g < kNumGroups; ++g)
      if (s.by_group[g].size()) groups[g].add(s.by_group[g]);
  });
  McSummary m;
  m.label = "ntk";
  m.n_inits = opt.n_inits;
  m.mean = total.mean();
  m.se = total.se();
  m.off_mean = cross.mean();
  m.off_se = cross.se();
  for (int g = 0; g < kNumGroups; ++g)
    if (groups[g].count()) {
      m.group_mean[g] = groups[g].mean();
      m.group_se[g] = groups[g].se();
    }
  return m;
}

// ---- gradients and probes ----------------------------------------------------

namespace {

std::vector<Eigen::MatrixXd> surrogate_cotangents(const ArchSpec& arch, int S) {
  const int out = arch.output_dim();
  const bool pooled = arch.pooling == Pooling::TokenMean;
  const double c = pooled ? 1.0 / (double(S) * out) : 1.0 / (double(S) * arch.T * out);
  // Pooled outputs spread the cotangent over tokens.
  return std::vector<Eigen::MatrixXd>(S, Eigen::MatrixXd::Constant(arch.T, out, pooled ? c / arch.T : c));
}

Eigen::MatrixXd outputs(const ModelParams& P, const Inputs& inputs) {
  const ForwardTrace ft = forward_pass(P, inputs);
  const bool pooled = P.arch.pooling == Pooling::TokenMean;
  Eigen::MatrixXd all(pooled ? inputs.samples() : inputs.samples() * P.arch.T, P.arch.output_dim());
  for (int a = 0; a < inputs.samples(); ++a) {
    if (pooled)
      all.row(a) = ft.samples[a].pooled;
    else
      all.middleRows(a * P.arch.T, P.arch.T) = ft.samples[a].f;
  }
  return all;
}

}  // namespace

std::vector<GroupGradStat> grad_magnitude_stats(const ArchSpec& arch, const ScalingPlan& plan,
                                                const Inputs& inputs, const McOptions& opt) {
  check_inits(opt);
  inputs.check(arch);
  std::array<ScalarStat, kNumGroups> stats;
  const auto cot = surrogate_cotangents(arch, inputs.samples());
  using Row = std::array<double, kNumGroups>;
  over_inits<Row>(opt.n_inits, [&](long k) {
    const ModelParams P = init_for(arch, plan, opt, k);
    const ModelParams g = vjp(P, inputs, cot);
    Row sum{}, count{};
    g.for_each([&](ParamGroup grp, Eigen::Ref<const Eigen::MatrixXd> m) {
      sum[gi(grp)] += m.cwiseAbs().sum();
      count[gi(grp)] += double(m.size());
    });
    Row mean{};
    for (int i = 0; i < kNumGroups; ++i) mean[i] = count[i] > 0 ? sum[i] / count[i] : -1.0;
    return mean;
  }, [&](const Row& r) {
    for (int i = 0; i < kNumGroups; ++i)
      if (r[i] >= 0) stats[i].add(r[i]);
  });
  std::vector<GroupGradStat> out;
  for (ParamGroup g : kAllGroups)
    if (stats[gi(g)].n) out.push_back({g, stats[gi(g)].mean(), stats[gi(g)].se(), stats[gi(g)].n});
  return out;
}

ProbeStat one_step_probe(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                         const ProbeOptions& probe, const McOptions& opt) {
  check_inits(opt);
  inputs.check(arch);
  if (!(probe.lr > 0)) throw InputError("probe learning rate must be positive");
  const auto cot = surrogate_cotangents(arch, inputs.samples());
  ScalarStat stat;
  over_inits<double>(opt.n_inits, [&](long k) {
    ModelParams P = init_for(arch, plan, opt, k);
    const Eigen::MatrixXd f0 = outputs(P, inputs);
    ModelParams g = vjp(P, inputs, cot);
    // Walk params and grads in the same order.
    std::vector<Eigen::MatrixXd> grads;
    g.for_each([&](ParamGroup, Eigen::Ref<const Eigen::MatrixXd> m) { grads.emplace_back(m); });
    std::size_t idx = 0;
    P.for_each([&](ParamGroup grp, Eigen::Ref<Eigen::MatrixXd> m) {
      const Eigen::MatrixXd& gr = grads[idx++];
      const double factor = plan.lr(grp, probe.optimizer);
      if (probe.optimizer == Optimizer::Sgd) {
        m -= probe.lr * factor * gr;
      } else {
        // AdamW at t = 1: bias-corrected moments are g and g^2.
        const double b1 = probe.beta1, b2 = probe.beta2;
        const Eigen::ArrayXXd mhat = ((1 - b1) * gr.array()) / (1 - b1);
        const Eigen::ArrayXXd vhat = ((1 - b2) * gr.array().square()) / (1 - b2);
        const Eigen::ArrayXXd step = mhat / (vhat.sqrt() + probe.eps) + probe.weight_decay * m.array();
        m.array() -= probe.lr * factor * step;
      }
      if (!m.allFinite()) throw NumericError("one_step_probe", "non-finite update");
    });
    const Eigen::MatrixXd f1 = outputs(P, inputs);
    return (f1 - f0).cwiseAbs().mean() / probe.lr;
  }, [&](double v) { stat.add(v); });
  return {stat.mean(), stat.se(), stat.n};
}

// ---- LN, eightfold, query-key -------------------------------------------------

LnStats ln_backward_stats(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                          int block, const McOptions& opt) {
  check_inits(opt);
  if (block < 0 || block > arch.depth()) throw InputError("ln_backward_stats: block out of range");
  MatrixStat stat;
  double worst = 0;
  struct R { Eigen::MatrixXd f; double err; };
  over_inits<R>(opt.n_inits, [&](long k) {
    const ModelParams P = init_for(arch, plan, opt, k);
    const ForwardTrace ft = forward_pass(P, inputs);
    const Eigen::MatrixXd Sm = stacked(ft.samples, [block](const SampleTrace& s) -> const Eigen::MatrixXd& { return s.s[block]; });
    Eigen::VectorXd inv(Sm.rows());
    for (int a = 0; a < inputs.samples(); ++a)
      inv.segment(a * arch.T, arch.T) = ft.samples[a].inv_std[block];
    const double n = double(Sm.cols());
    // J_p = r_p (I - (1 1^T + s_p s_p^T)/n);  (1/n) tr(J_p^T J_q) in closed form.
    const Eigen::VectorXd sums = Sm.rowwise().sum();
    const Eigen::VectorXd sq = Sm.rowwise().squaredNorm();
    const Eigen::MatrixXd dots = Sm * Sm.transpose();
    R r;
    r.f.resize(Sm.rows(), Sm.rows());
    for (Eigen::Index p = 0; p < Sm.rows(); ++p)
      for (Eigen::Index q = 0; q < Sm.rows(); ++q) {
        const double tr = n - (1.0 + sq(p) / n) - (1.0 + sq(q) / n) +
                          (n * n + sums(p) * sums(p) + sums(q) * sums(q) + dots(p, q) * dots(p, q)) / (n * n);
        r.f(p, q) = inv(p) * inv(q) * tr / n;
      }
    r.err = ((sq / n).array() - 1.0).abs().maxCoeff();
    return r;
  }, [&](const R& r) {
    stat.add(r.f);
    worst = std::max(worst, r.err);
  });
  LnStats out;
  out.factor.label = "ln_backward";
  out.factor.mean = stat.mean();
  out.factor.se = stat.se();
  out.factor.n_inits = opt.n_inits;
  out.max_norm_error = worst;
  return out;
}

EightfoldStats eightfold_stats(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                               int position, const Eigen::VectorXd& G_theory_diag,
                               const McOptions& opt) {
  check_inits(opt);
  if (position < 0 || position > arch.depth()) throw InputError("eightfold_stats: position out of range");
  ScalarStat s1, s2, s3, s4;
  using Q = std::array<double, 4>;
  over_inits<Q>(opt.n_inits, [&](long k) {
    const ModelParams P = init_for(arch, plan, opt, k);
    const ForwardTrace ft = forward_pass(P, inputs);
    const Eigen::MatrixXd Z = stacked(ft.samples, [position](const SampleTrace& s) -> const Eigen::MatrixXd& { return s.z[position]; });
    const double n = double(Z.cols());
    Q q{};
    for (Eigen::Index p = 0; p < Z.rows(); ++p) {
      const double G = G_theory_diag(p);
      const double dG = Z.row(p).squaredNorm() / n - G;
      const double m = Z.row(p).sum() / n;
      const double nab = m * m;
      q[0] += dG;
      q[1] += nab;
      q[2] += dG * dG - 2.0 * G * G / n;
      q[3] += dG * nab;
    }
    for (double& v : q) v /= double(Z.rows());
    return q;
  }, [&](const Q& q) {
    s1.add(q[0]);
    s2.add(q[1]);
    s3.add(q[2]);
    s4.add(q[3]);
  });
  return {s1.mean(), s2.mean(), s3.mean(), s4.mean(), s1.se(), s2.se(), s3.se(), s4.se()};
}

QkStats qk_dot_stats(const ArchSpec& arch, const ScalingPlan& plan, const Inputs& inputs,
                     int block, const std::vector<std::vector<int>>& quads, const McOptions& opt) {
  check_inits(opt);
  if (block < 0 || block >= arch.depth() || !is_mhsa(arch.blocks[block]))
    throw InputError("qk_dot_stats: block is not an MHSA block");
  QkStats st;
  st.quads = quads;
  st.fourth.resize(quads.size());
  const int S = inputs.samples(), T = arch.T, H = arch.H, d = S * T * T;
  struct R { std::vector<Eigen::VectorXd> heads; };
  over_inits<R>(opt.n_inits, [&](long k) {
    const ModelParams P = init_for(arch, plan, opt, k);
    R r;
    std::vector<SampleTrace> tr;
    for (int a = 0; a < S; ++a) tr.push_back(forward_sample(P, inputs, a));
    for (int h = 0; h < H; ++h) {
      Eigen::VectorXd w(d);
      for (int a = 0; a < S; ++a)
        for (int t = 0; t < T; ++t)
          for (int u = 0; u < T; ++u) w((a * T + t) * T + u) = tr[a].blocks[block].logits[h](t, u);
      r.heads.push_back(std::move(w));
    }
    return r;
  }, [&](const R& r) {
    // Each head is an independent draw; cross-head pairs h, h+1.
    for (int h = 0; h < H; ++h) {
      const Eigen::VectorXd& w = r.heads[h];
      st.second.add(w * w.transpose());
      if (H > 1) st.cross_head.add(w * r.heads[(h + 1) % H].transpose());
      for (std::size_t i = 0; i < quads.size(); ++i) {
        double prod = 1;
        for (int idx : quads[i]) prod *= w(idx);
        st.fourth[i].add(prod);
      }
    }
  });
  return st;
}

}  // namespace wf
