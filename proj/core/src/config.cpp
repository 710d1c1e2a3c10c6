// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace wf {

namespace {

std::string where(const std::string& source, const toml::source_region& r) {
  std::ostringstream os;
  os << source << ":" << r.begin.line << ":" << r.begin.column;
  return os.str();
}

// Reads one table, remembering which keys were consumed so that typos are
// reported instead of silently ignored.
class Section {
 public:
  Section(const toml::table* t, std::string name, const std::string& source)
      : t_(t), name_(std::move(name)), source_(source) {}

  bool present() const { return t_ != nullptr; }

  const toml::node* node(const std::string& key) {
    if (!t_) return nullptr;
    used_.insert(key);
    return t_->get(key);
  }

  [[noreturn]] void fail(const toml::node& n, const std::string& key, const std::string& msg) const {
    throw InputError(where(source_, n.source()) + ": field '" + qualified(key) + "': " + msg);
  }

  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const toml::node* n = node(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = n->value<bool>();
      if (!n->is_boolean() || !v) fail(*n, key, "expected a boolean");
      out = *v;
    } else if constexpr (std::is_integral_v<T>) {
      if (!n->is_integer()) fail(*n, key, "expected an integer");
      const auto v = *n->value<std::int64_t>();
      if (v < 0 && std::is_unsigned_v<T>) fail(*n, key, "expected a non-negative integer");
      out = T(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!n->is_number()) fail(*n, key, "expected a number");
      out = *n->value<double>();
    } else {
      if (!n->is_string()) fail(*n, key, "expected a string");
      out = *n->value<std::string>();
    }
  }

  // Parses a string field with `parse`, turning its InputError into a
  // located diagnostic.
  template <typename T, typename Parse>
  void get_enum(const std::string& key, T& out, Parse&& parse) {
    std::string s;
    get(key, s);
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) return;
    try {
      out = parse(s);
    } catch (const InputError& e) {
      fail(*n, key, e.what());
    }
  }

  template <typename T>
  void get_list(const std::string& key, std::vector<T>& out) {
    const toml::node* n = node(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) fail(*n, key, "expected an array");
    std::vector<T> v;
    for (const toml::node& e : *arr) {
      if constexpr (std::is_integral_v<T>) {
        if (!e.is_integer()) fail(e, key, "expected integers");
        v.push_back(T(*e.value<std::int64_t>()));
      } else {
        if (!e.is_string()) fail(e, key, "expected strings");
        v.push_back(*e.value<std::string>());
      }
    }
    out = std::move(v);
  }

  // Group-keyed table of numbers, e.g. [constants.init] Q = 0.5.
  void get_groups(std::array<std::optional<double>, kNumGroups>& out) {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      const std::string key(k.str());
      used_.insert(key);
      ParamGroup g;
      try {
        g = parse_group(key);
      } catch (const InputError&) {
        fail(v, key, "unknown parameter group");
      }
      if (!v.is_number()) fail(v, key, "expected a number");
      const double x = *v.value<double>();
      if (!(x >= 0)) fail(v, key, "must be non-negative");
      out[gi(g)] = x;
    }
  }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      const std::string key(k.str());
      if (!used_.count(key)) fail(v, key, "unknown key");
    }
  }

 private:
  const toml::table* t_;
  std::string name_;
  const std::string& source_;
  std::set<std::string> used_;
};

const toml::table* subtable(Section& parent, const std::string& key, const std::string& source) {
  const toml::node* n = parent.node(key);
  if (!n) return nullptr;
  const toml::table* t = n->as_table();
  if (!t) throw InputError(where(source, n->source()) + ": '" + key + "' must be a table");
  return t;
}

}  // namespace

void RunConfig::validate() const {
  arch.validate();
  if (samples < 1 || samples > 64) throw InputError("data.samples must be in [1, 64]");
  if (verify.widths.size() < 2) throw InputError("verify.widths needs at least two entries");
  for (std::size_t i = 0; i < verify.widths.size(); ++i) {
    if (verify.widths[i] < 2) throw InputError("verify.widths entries must be >= 2");
    if (i && verify.widths[i] <= verify.widths[i - 1])
      throw InputError("verify.widths must be strictly increasing");
  }
  if (verify.n_inits < 1) throw InputError("verify.n_inits must be positive");
  if (verify.channels < 1) throw InputError("verify.channels must be positive");
  const Tolerances& t = verify.tol;
  for (double v : {t.fd_relative, t.converge_ratio, t.diagonal_z, t.ln_forward, t.ln_backward_z,
                   t.eightfold_band, t.attention_z, t.ntk_slack, t.grad_ratio, t.update_flatness})
    if (!(v > 0)) throw InputError("tolerances must be positive");
  if (!(probe.lr > 0)) throw InputError("probe.lr must be positive");
  if (propagate.attention_samples < 16) throw InputError("propagate.attention_samples must be >= 16");
  if (propagate.quadrature_order < 2 || propagate.quadrature_order > 200)
    throw InputError("propagate.quadrature_order must be in [2, 200]");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw InputError(where(source, e.source()) + ": " + std::string(e.description()));
  }
  RunConfig cfg;
  cfg.source = source;
  Section top(&root, "", source);

  Section arch(subtable(top, "arch", source), "arch", source);
  ArchSpec& a = cfg.arch;
  arch.get_enum("modality", a.modality, parse_modality);
  if (a.modality == Modality::Language) {
    // Language defaults: causal attention, tied head.
    a.blocks = {BlockKind::MhsaMasked, BlockKind::Mlp};
    a.weight_tying = true;
    a.n_in = 32;
  }
  arch.get("width", a.n);
  arch.get("heads", a.H);
  arch.get("mlp_multiplier", a.M);
  arch.get("tokens", a.T);
  arch.get("n_in", a.n_in);
  arch.get("n_out", a.n_out);
  std::vector<std::string> blocks;
  if (const toml::node* n = root["arch"]["blocks"].node()) {
    arch.get_list("blocks", blocks);
    a.blocks.clear();
    for (const auto& b : blocks) {
      try {
        a.blocks.push_back(parse_block(b));
      } catch (const InputError& e) {
        arch.fail(*n, "blocks", e.what());
      }
    }
  }
  arch.get("layer_norm_eps", a.eps_ln);
  arch.get_enum("activation", a.activation, parse_activation);
  arch.get_enum("pooling", a.pooling, parse_pooling);
  arch.get("weight_tying", a.weight_tying);
  arch.finish();

  Section strat(subtable(top, "strategy", source), "strategy", source);
  strat.get_enum("preset", cfg.strategy.preset, parse_preset);
  if (const toml::node* n = root["strategy"]["s"].node()) {
    strat.get("s", cfg.strategy.s);
    if (cfg.strategy.preset != Preset::Custom) strat.fail(*n, "s", "only valid with preset = \"custom\"");
    if (!(cfg.strategy.s >= 0 && cfg.strategy.s <= 1)) strat.fail(*n, "s", "must lie in [0, 1]");
  }
  strat.get("ignore_mlp_multiplier", cfg.strategy.ignore_mlp_multiplier);
  strat.get_enum("optimizer", cfg.optimizer, parse_optimizer);
  strat.finish();

  Section consts(subtable(top, "constants", source), "constants", source);
  if (consts.present()) {
    Section i(subtable(consts, "init", source), "constants.init", source);
    i.get_groups(cfg.init_constant);
    Section sd(subtable(consts, "init_std", source), "constants.init_std", source);
    sd.get_groups(cfg.init_std);
    Section sg(subtable(consts, "sgd", source), "constants.sgd", source);
    sg.get_groups(cfg.sgd_constant);
    Section ad(subtable(consts, "adamw", source), "constants.adamw", source);
    ad.get_groups(cfg.adamw_constant);
    consts.finish();
  }
  Section factors(subtable(top, "lr_factor", source), "lr_factor", source);
  if (factors.present()) {
    Section sg(subtable(factors, "sgd", source), "lr_factor.sgd", source);
    sg.get_groups(cfg.sgd_factor);
    Section ad(subtable(factors, "adamw", source), "lr_factor.adamw", source);
    ad.get_groups(cfg.adamw_factor);
    factors.finish();
  }

  Section data(subtable(top, "data", source), "data", source);
  data.get("samples", cfg.samples);
  data.get("seed", cfg.data_seed);
  data.get_enum("distribution", cfg.distribution, [](std::string_view s) {
    if (s == "normal") return Distribution::Normal;
    if (s == "uniform") return Distribution::Uniform;
    throw InputError("unknown distribution '" + std::string(s) + "' (normal, uniform)");
  });
  data.finish();

  Section prop(subtable(top, "propagate", source), "propagate", source);
  prop.get("attention_samples", cfg.propagate.attention_samples);
  prop.get("quadrature_order", cfg.propagate.quadrature_order);
  prop.get("seed", cfg.propagate.seed);
  prop.finish();

  Section ver(subtable(top, "verify", source), "verify", source);
  VerifySettings& v = cfg.verify;
  ver.get_list("widths", v.widths);
  ver.get("n_inits", v.n_inits);
  ver.get("kernel_inits", v.kernel_inits);
  ver.get("ntk_inits", v.ntk_inits);
  ver.get("attention_inits", v.attention_inits);
  ver.get("seed", v.seed);
  ver.get("channels", v.channels);
  ver.get_list("attention_heads", v.attention_heads);
  if (ver.present()) {
    Section tol(subtable(ver, "tolerances", source), "verify.tolerances", source);
    Tolerances& t = v.tol;
    tol.get("fd_relative", t.fd_relative);
    tol.get("converge_ratio", t.converge_ratio);
    tol.get("diagonal_z", t.diagonal_z);
    tol.get("ln_forward", t.ln_forward);
    tol.get("ln_backward_z", t.ln_backward_z);
    tol.get("eightfold_band", t.eightfold_band);
    tol.get("attention_z", t.attention_z);
    tol.get("ntk_slack", t.ntk_slack);
    tol.get("grad_ratio", t.grad_ratio);
    tol.get("update_flatness", t.update_flatness);
    tol.finish();
  }
  ver.finish();

  Section probe(subtable(top, "probe", source), "probe", source);
  probe.get("lr", cfg.probe.lr);
  probe.get("beta1", cfg.probe.beta1);
  probe.get("beta2", cfg.probe.beta2);
  probe.get("eps", cfg.probe.eps);
  probe.get("weight_decay", cfg.probe.weight_decay);
  probe.finish();

  Section out(subtable(top, "output", source), "output", source);
  out.get("dir", cfg.out_dir);
  out.finish();
  top.finish();

  try {
    cfg.validate();
  } catch (const InputError& e) {
    throw InputError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

ScalingPlan build_plan(const RunConfig& cfg, const ArchSpec& arch) {
  InitConstants ic = InitConstants::defaults(arch.modality, cfg.strategy.preset);
  LrConstants lr = LrConstants::defaults();
  for (int g = 0; g < kNumGroups; ++g) {
    if (cfg.init_constant[g]) ic.C[g] = *cfg.init_constant[g];
    if (cfg.init_std[g]) {
      ic.C[g] = *cfg.init_std[g] * *cfg.init_std[g];
      ic.absolute[g] = true;
    }
    if (cfg.sgd_constant[g]) lr.sgd[g] = *cfg.sgd_constant[g];
    if (cfg.adamw_constant[g]) lr.adamw[g] = *cfg.adamw_constant[g];
  }
  ScalingPlan plan = make_plan(arch, cfg.strategy, ic, lr);
  for (int g = 0; g < kNumGroups; ++g) {
    if (cfg.sgd_factor[g]) plan.entries[g].sgd = Monomial::constant(*cfg.sgd_factor[g]);
    if (cfg.adamw_factor[g]) plan.entries[g].adamw = Monomial::constant(*cfg.adamw_factor[g]);
  }
  return plan;
}

Inputs build_inputs(const RunConfig& cfg, const ArchSpec& arch) {
  return make_inputs(arch, cfg.samples, cfg.data_seed);
}

}  // namespace wf
