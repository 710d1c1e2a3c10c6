// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/plan.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace wf {

namespace {

double pow_or_one(double base, double e) { return e == 0.0 ? 1.0 : std::pow(base, e); }

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Exponent as a small fraction when possible: -0.5 -> "-1/2".
std::string format_exponent(double e) {
  for (int den = 1; den <= 12; ++den) {
    double num = e * den;
    if (std::abs(num - std::round(num)) < 1e-12) {
      long k = std::lround(num);
      return den == 1 ? std::to_string(k) : std::to_string(k) + "/" + std::to_string(den);
    }
  }
  return format_number(e);
}

std::string power(const std::string& base, double e) {
  if (e == 1.0) return base;
  return base + "^{" + format_exponent(e) + "}";
}

}  // namespace

double Monomial::eval(const Dims& d) const {
  return coeff * pow_or_one(d.n, e_n) * pow_or_one(d.n_in, e_in) *
         pow_or_one(d.n_out, e_out) * pow_or_one(d.M, e_M);
}

Monomial Monomial::sqrt() const {
  return {std::sqrt(coeff), e_n / 2, e_in / 2, e_out / 2, e_M / 2};
}

Monomial Monomial::operator*(const Monomial& o) const {
  return {coeff * o.coeff, e_n + o.e_n, e_in + o.e_in, e_out + o.e_out, e_M + o.e_M};
}

Monomial Monomial::operator/(const Monomial& o) const {
  return {coeff / o.coeff, e_n - o.e_n, e_in - o.e_in, e_out - o.e_out, e_M - o.e_M};
}

bool Monomial::same_as(const Monomial& o) const {
  if (e_n != o.e_n || e_in != o.e_in || e_out != o.e_out || e_M != o.e_M) return false;
  const double scale = std::max(std::abs(coeff), std::abs(o.coeff));
  return std::abs(coeff - o.coeff) <= 1e-14 * scale;
}

std::string Monomial::render(const Dims& d, bool numeric) const {
  if (coeff == 0.0) return "0";
  std::vector<std::string> parts;
  if (coeff != 1.0 || is_constant()) parts.push_back(format_number(coeff));
  auto num = [&](double v, const char* sym) {
    return numeric ? format_number(v) : std::string(sym);
  };
  if (e_in != 0) parts.push_back(power(num(d.n_in, "n_in"), e_in));
  if (e_n != 0) parts.push_back(power("n", e_n));
  if (e_out != 0) parts.push_back(power(num(d.n_out, "n_out"), e_out));
  if (e_M != 0) parts.push_back(power(num(d.M, "M"), e_M));
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "·" : "") + parts[i];
  return out;
}

std::string_view to_string(Preset p) {
  switch (p) {
    case Preset::Standard: return "standard";
    case Preset::NeuralTangent: return "neural-tangent";
    case Preset::Hybrid: return "hybrid";
    case Preset::MaximalUpdate: return "maximal-update";
    case Preset::Custom: return "custom";
  }
  return "?";
}

Preset parse_preset(std::string_view s) {
  for (Preset p : {Preset::Standard, Preset::NeuralTangent, Preset::Hybrid,
                   Preset::MaximalUpdate, Preset::Custom})
    if (to_string(p) == s) return p;
  throw InputError("unknown strategy preset '" + std::string(s) + "'");
}

std::string_view to_string(Optimizer o) { return o == Optimizer::Sgd ? "sgd" : "adamw"; }

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "adamw") return Optimizer::AdamW;
  throw InputError("unknown optimizer '" + std::string(s) + "'");
}

double ScalingStrategy::meta_s() const {
  switch (preset) {
    case Preset::Standard:
    case Preset::NeuralTangent: return 0.0;
    case Preset::Hybrid: return 0.5;
    case Preset::MaximalUpdate: return 1.0;
    case Preset::Custom: return s;
  }
  return 0.0;
}

InitConstants InitConstants::defaults(Modality m, Preset p) {
  InitConstants c;
  c[ParamGroup::Patch] = 1.0;
  c[ParamGroup::WordEmb] = (m == Modality::Language && p == Preset::Standard) ? 0.02 * 0.02 : 1.0;
  c[ParamGroup::PosEmb] = 0.02 * 0.02;
  c[ParamGroup::Q] = 0.5;
  c[ParamGroup::K] = 0.5;
  c[ParamGroup::V] = 0.5;
  c[ParamGroup::U] = 1.0 / 3.0;
  c[ParamGroup::W] = 2.0 / 5.0;
  c[ParamGroup::X] = 8.0 / 5.0;
  c[ParamGroup::HeadW] = 1.0;
  c[ParamGroup::HeadB] = 0.0;
  c.absolute[gi(ParamGroup::WordEmb)] = true;
  c.absolute[gi(ParamGroup::PosEmb)] = true;
  return c;
}

LrConstants LrConstants::defaults() {
  LrConstants l;
  l.sgd.fill(1.0);
  l.adamw.fill(1.0);
  return l;
}

double ScalingPlan::init_std(ParamGroup g) const { return entries[gi(g)].init_var.sqrt().eval(dims); }

bool ScalingPlan::operator==(const ScalingPlan& o) const {
  if (!(dims == o.dims) || modality != o.modality || s != o.s ||
      strategy.preset != o.strategy.preset || strategy.s != o.strategy.s ||
      strategy.ignore_mlp_multiplier != o.strategy.ignore_mlp_multiplier ||
      constants.C != o.constants.C || constants.absolute != o.constants.absolute ||
      lr_constants.sgd != o.lr_constants.sgd || lr_constants.adamw != o.lr_constants.adamw ||
      active != o.active || !(n_rescale == o.n_rescale))
    return false;
  for (int i = 0; i < kNumGroups; ++i) {
    const auto &a = entries[i], &b = o.entries[i];
    if (!(a.init_var == b.init_var) || !(a.sgd == b.sgd) || !(a.adamw == b.adamw)) return false;
  }
  return true;
}

// Fan scaling of each group's variance at s = 0 (the "canonical" power).
static Monomial init_fan(ParamGroup g) {
  switch (g) {
    case ParamGroup::Patch: return {1.0, 0, -1};
    case ParamGroup::WordEmb:
    case ParamGroup::PosEmb:
    case ParamGroup::HeadB: return {};
    case ParamGroup::X: return {1.0, -1, 0, 0, -1};
    default: return {1.0, -1};
  }
}

// SGD fan of each group at s = 0, with the MLP multiplier kept.
static Monomial sgd_fan(ParamGroup g) {
  switch (g) {
    case ParamGroup::Patch: return {1.0, 0, -1};
    case ParamGroup::WordEmb:
    case ParamGroup::PosEmb:
    case ParamGroup::HeadB: return {};
    case ParamGroup::X: return {1.0, -1, 0, 0, -1};
    default: return {1.0, -1};
  }
}

Monomial output_rescale_monomial(const ArchSpec& arch, const ScalingStrategy& strategy) {
  if (!arch.tied_head() || strategy.preset == Preset::Standard) return {};
  return Monomial::n_pow(-(1.0 + strategy.meta_s()) / 2.0);
}

double output_rescale(const ArchSpec& arch, const ScalingStrategy& strategy) {
  return output_rescale_monomial(arch, strategy).eval(Dims::of(arch));
}

ScalingPlan make_init_plan(const ArchSpec& arch, const ScalingStrategy& strategy,
                           const InitConstants& constants) {
  arch.validate();
  const double s = strategy.meta_s();
  if (s < 0.0 || s > 1.0) throw InputError("meta parameter s must lie in [0, 1]");
  ScalingPlan plan;
  plan.dims = Dims::of(arch);
  plan.modality = arch.modality;
  plan.strategy = strategy;
  plan.s = s;
  plan.constants = constants;
  for (ParamGroup g : kAllGroups) {
    const double c = constants[g];
    if (g == ParamGroup::HeadB) {
      plan.entries[gi(g)].init_var = Monomial::constant(0.0);
    } else {
      if (!(c >= 0.0)) throw InputError("negative init constant for group " + std::string(to_string(g)));
      if (constants.absolute[gi(g)]) {
        plan.entries[gi(g)].init_var = Monomial::constant(c);
      } else {
        Monomial m = init_fan(g);
        m.coeff = c;
        if (g == ParamGroup::HeadW) m.e_n = -(1.0 + (strategy.preset == Preset::Standard ? 0.0 : s));
        plan.entries[gi(g)].init_var = m;
      }
    }
    plan.active[gi(g)] = arch.has_group(g);
  }
  plan.n_rescale = output_rescale_monomial(arch, strategy);
  return plan;
}

std::array<Monomial, kNumGroups> make_lr_plan(const ArchSpec& arch, Optimizer optimizer,
                                              const ScalingStrategy& strategy,
                                              const LrConstants& constants) {
  arch.validate();
  std::array<Monomial, kNumGroups> out;
  if (strategy.preset == Preset::Standard) {
    for (ParamGroup g : kAllGroups) out[gi(g)] = Monomial::constant(1.0);
    return out;
  }
  const double s = strategy.meta_s();
  const double m_pow = strategy.ignore_mlp_multiplier ? 0.0 : 1.0;
  for (ParamGroup g : kAllGroups) {
    Monomial m;
    if (optimizer == Optimizer::Sgd) {
      m = sgd_fan(g);
      if (g == ParamGroup::X) m.e_M = -m_pow;
      m.coeff = constants.sgd[gi(g)];
      if (!is_head_group(g)) m.e_n += s;
    } else {
      m.coeff = constants.adamw[gi(g)];
      switch (g) {
        case ParamGroup::Patch: m.e_in = -1; m.e_n = -0.5; break;
        case ParamGroup::WordEmb:
        case ParamGroup::PosEmb: m.e_n = -0.5; break;
        case ParamGroup::Q:
        case ParamGroup::K:
        case ParamGroup::V:
        case ParamGroup::U: m.e_n = -1.5; break;
        case ParamGroup::W: m.e_n = -1.5; m.e_M = -0.5 * m_pow; break;
        case ParamGroup::X: m.e_n = -1.5; m.e_M = -m_pow; break;
        case ParamGroup::HeadW: m.e_n = -1; m.e_out = -0.5; break;
        case ParamGroup::HeadB: m.e_out = -0.5; break;
      }
      if (!is_head_group(g)) m.e_n += s / 2.0;
    }
    out[gi(g)] = m;
  }
  return out;
}

ScalingPlan make_plan(const ArchSpec& arch, const ScalingStrategy& strategy,
                      const InitConstants& constants, const LrConstants& lr) {
  ScalingPlan plan = make_init_plan(arch, strategy, constants);
  plan.lr_constants = lr;
  auto sgd = make_lr_plan(arch, Optimizer::Sgd, strategy, lr);
  auto adamw = make_lr_plan(arch, Optimizer::AdamW, strategy, lr);
  for (int i = 0; i < kNumGroups; ++i) {
    plan.entries[i].sgd = sgd[i];
    plan.entries[i].adamw = adamw[i];
  }
  return plan;
}

ScalingPlan make_plan(const ArchSpec& arch, const ScalingStrategy& strategy) {
  return make_plan(arch, strategy, InitConstants::defaults(arch.modality, strategy.preset));
}

// ---- JSON -----------------------------------------------------------------

namespace {

using ojson = nlohmann::ordered_json;

ojson mono_json(const Monomial& m) {
  return ojson{{"coeff", m.coeff}, {"n", m.e_n}, {"n_in", m.e_in}, {"n_out", m.e_out}, {"M", m.e_M}};
}

Monomial mono_from(const ojson& j) {
  return {j.at("coeff").get<double>(), j.at("n").get<double>(), j.at("n_in").get<double>(),
          j.at("n_out").get<double>(), j.at("M").get<double>()};
}

}  // namespace

std::string plan_to_json(const ScalingPlan& p) {
  ojson j;
  j["strategy"] = std::string(to_string(p.strategy.preset));
  j["s"] = p.s;
  j["strategy_s"] = p.strategy.s;
  j["ignore_mlp_multiplier"] = p.strategy.ignore_mlp_multiplier;
  j["modality"] = std::string(to_string(p.modality));
  j["dims"] = ojson{{"n", p.dims.n}, {"n_in", p.dims.n_in}, {"n_out", p.dims.n_out}, {"M", p.dims.M}};
  j["n_rescale"] = ojson{{"value", p.rescale()}, {"symbolic", mono_json(p.n_rescale)}};
  ojson groups = ojson::object();
  for (ParamGroup g : kAllGroups) {
    const auto& e = p[g];
    ojson gj;
    gj["active"] = p.active[gi(g)];
    gj["init_var"] = e.init_var.eval(p.dims);
    gj["sgd_factor"] = e.sgd.eval(p.dims);
    gj["adamw_factor"] = e.adamw.eval(p.dims);
    gj["constant_C"] = p.constants.C[gi(g)];
    gj["constant_absolute"] = p.constants.absolute[gi(g)];
    gj["constant_sgd"] = p.lr_constants.sgd[gi(g)];
    gj["constant_adamw"] = p.lr_constants.adamw[gi(g)];
    gj["symbolic"] = ojson{{"init_var", mono_json(e.init_var)},
                           {"sgd_factor", mono_json(e.sgd)},
                           {"adamw_factor", mono_json(e.adamw)}};
    groups[std::string(to_string(g))] = gj;
  }
  j["groups"] = groups;
  return j.dump(2) + "\n";
}

ScalingPlan plan_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    throw InputError(std::string("plan JSON parse error: ") + e.what());
  }
  try {
    ScalingPlan p;
    p.strategy.preset = parse_preset(j.at("strategy").get<std::string>());
    p.strategy.s = j.at("strategy_s").get<double>();
    p.strategy.ignore_mlp_multiplier = j.at("ignore_mlp_multiplier").get<bool>();
    p.s = j.at("s").get<double>();
    p.modality = parse_modality(j.at("modality").get<std::string>());
    const auto& d = j.at("dims");
    p.dims = {d.at("n").get<double>(), d.at("n_in").get<double>(), d.at("n_out").get<double>(),
              d.at("M").get<double>()};
    p.n_rescale = mono_from(j.at("n_rescale").at("symbolic"));
    for (const auto& [name, gj] : j.at("groups").items()) {
      const std::size_t i = gi(parse_group(name));
      p.active[i] = gj.at("active").get<bool>();
      p.constants.C[i] = gj.at("constant_C").get<double>();
      p.constants.absolute[i] = gj.at("constant_absolute").get<bool>();
      p.lr_constants.sgd[i] = gj.at("constant_sgd").get<double>();
      p.lr_constants.adamw[i] = gj.at("constant_adamw").get<double>();
      const auto& sj = gj.at("symbolic");
      p.entries[i] = {mono_from(sj.at("init_var")), mono_from(sj.at("sgd_factor")),
                      mono_from(sj.at("adamw_factor"))};
    }
    return p;
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("plan JSON missing or malformed field: ") + e.what());
  }
}

// ---- tables ---------------------------------------------------------------

std::string_view group_label(ParamGroup g) {
  switch (g) {
    case ParamGroup::Patch: return "patchify embedding";
    case ParamGroup::WordEmb: return "word embedding";
    case ParamGroup::PosEmb: return "positional embedding";
    case ParamGroup::Q: return "query weights";
    case ParamGroup::K: return "key weights";
    case ParamGroup::V: return "value weights";
    case ParamGroup::U: return "attention output weights";
    case ParamGroup::W: return "MLP input weights";
    case ParamGroup::X: return "MLP output weights";
    case ParamGroup::HeadW: return "head weights";
    case ParamGroup::HeadB: return "head biases";
  }
  return "?";
}

std::string render_plan_table(const ScalingPlan& plan, Optimizer optimizer) {
  std::ostringstream os;
  os << "# strategy " << to_string(plan.strategy.preset) << " (s=" << format_number(plan.s)
     << "), optimizer " << to_string(optimizer) << ", n=" << format_number(plan.dims.n) << "\n";
  for (ParamGroup g : kAllGroups) {
    if (!plan.active[gi(g)]) continue;
    const auto& e = plan[g];
    os << group_label(g) << ": std " << e.init_var.sqrt().render(plan.dims) << ", lr factor "
       << (optimizer == Optimizer::Sgd ? e.sgd : e.adamw).render(plan.dims);
    if (g == ParamGroup::WordEmb && !plan.active[gi(ParamGroup::HeadW)])
      os << ", rescale " << plan.n_rescale.render(plan.dims);
    os << "\n";
  }
  return os.str();
}

// ---- theory constants -----------------------------------------------------

TheoryConstants theory_constants(const ScalingPlan& plan, const ArchSpec& arch) {
  TheoryConstants t;
  const Dims& d = plan.dims;
  for (ParamGroup g : kAllGroups) {
    const auto& e = plan[g];
    t.C[gi(g)] = (e.init_var / init_fan(g)).eval(d);
    Monomial fan = sgd_fan(g);
    t.Lambda[gi(g)] = (e.sgd / fan).eval(d);
  }
  const bool vision = arch.modality == Modality::Vision;
  t.C_emb = vision ? t.C[gi(ParamGroup::Patch)] : t.C[gi(ParamGroup::WordEmb)];
  t.Lambda_emb = vision ? t.Lambda[gi(ParamGroup::Patch)] : t.Lambda[gi(ParamGroup::WordEmb)];
  if (arch.tied_head()) {
    // z = N · W_WEᵀ s:  per-channel variance and additive factor carry N²·n.
    const Monomial scale = plan.n_rescale * plan.n_rescale * Monomial::n_pow(1.0);
    t.C_head = (plan[ParamGroup::WordEmb].init_var * scale).eval(d);
    t.Lambda_head_w = (plan[ParamGroup::WordEmb].sgd * scale).eval(d);
    t.Lambda_head_b = 0.0;
  } else {
    t.C_head = t.C[gi(ParamGroup::HeadW)];
    t.Lambda_head_w = t.Lambda[gi(ParamGroup::HeadW)];
    t.Lambda_head_b = t.Lambda[gi(ParamGroup::HeadB)];
  }
  return t;
}

}  // namespace wf
