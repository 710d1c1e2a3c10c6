// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Initialization and learning-rate scaling plans.
//
// Every plan entry is kept as a monomial  c · n^a · n_in^b · n_out^d · M^e
// so that tables can be compared symbolically and the theory can recover
// the order-one constants exactly (no divide-then-multiply rounding).

#ifndef WIDEFORMER_PLAN_HPP_
#define WIDEFORMER_PLAN_HPP_

#include <array>
#include <string>

#include "wideformer/arch.hpp"

namespace wf {

struct Dims {
  double n = 1, n_in = 1, n_out = 1, M = 1;
  static Dims of(const ArchSpec& a) {
    return {double(a.n), double(a.n_in), double(a.output_dim()), double(a.M)};
  }
  bool operator==(const Dims&) const = default;
};

struct Monomial {
  double coeff = 1.0;
  double e_n = 0.0, e_in = 0.0, e_out = 0.0, e_M = 0.0;

  double eval(const Dims& d) const;
  bool is_constant() const { return e_n == 0 && e_in == 0 && e_out == 0 && e_M == 0; }
  Monomial sqrt() const;
  Monomial operator*(const Monomial& o) const;
  Monomial operator/(const Monomial& o) const;
  // Same powers and coefficient within a relative 1e-14.
  bool same_as(const Monomial& o) const;
  bool operator==(const Monomial&) const = default;

  // Renders e.g. "768^{-1}·n^{-1/2}"; n_in, n_out, M are substituted by
  // their numeric values when `numeric` is set (n stays symbolic).
  std::string render(const Dims& d, bool numeric = true) const;

  static Monomial constant(double c) { return {c}; }
  static Monomial n_pow(double e, double c = 1.0) { return {c, e}; }
};

enum class Preset { Standard, NeuralTangent, Hybrid, MaximalUpdate, Custom };
enum class Optimizer { Sgd, AdamW };

std::string_view to_string(Preset p);
Preset parse_preset(std::string_view s);
std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

struct ScalingStrategy {
  Preset preset = Preset::NeuralTangent;
  double s = 0.0;  // used when preset == Custom
  bool ignore_mlp_multiplier = false;

  double meta_s() const;
  static ScalingStrategy from_preset(Preset p, bool ignore_m = false) {
    return {p, 0.0, ignore_m};
  }
  static ScalingStrategy custom(double s, bool ignore_m = false) {
    return {Preset::Custom, s, ignore_m};
  }
};

using GroupArray = std::array<double, kNumGroups>;
inline std::size_t gi(ParamGroup g) { return static_cast<std::size_t>(g); }

// Order-one initialization constants C_G.  When `absolute[G]` is set the
// value is the entry variance itself (no fan divisor, no width power).
struct InitConstants {
  GroupArray C{};
  std::array<bool, kNumGroups> absolute{};

  double& operator[](ParamGroup g) { return C[gi(g)]; }
  double operator[](ParamGroup g) const { return C[gi(g)]; }
  static InitConstants defaults(Modality m, Preset p);
};

struct LrConstants {
  GroupArray sgd{};    // Λ_G
  GroupArray adamw{};  // Λ̃_G
  static LrConstants defaults();
};

struct PlanEntry {
  Monomial init_var, sgd, adamw;
};

struct ScalingPlan {
  Dims dims;
  Modality modality = Modality::Vision;
  ScalingStrategy strategy;
  double s = 0.0;
  InitConstants constants;
  LrConstants lr_constants;
  std::array<bool, kNumGroups> active{};
  std::array<PlanEntry, kNumGroups> entries{};
  Monomial n_rescale;

  const PlanEntry& operator[](ParamGroup g) const { return entries[gi(g)]; }
  double init_var(ParamGroup g) const { return entries[gi(g)].init_var.eval(dims); }
  double init_std(ParamGroup g) const;
  double sgd(ParamGroup g) const { return entries[gi(g)].sgd.eval(dims); }
  double adamw(ParamGroup g) const { return entries[gi(g)].adamw.eval(dims); }
  double lr(ParamGroup g, Optimizer o) const {
    return o == Optimizer::Sgd ? sgd(g) : adamw(g);
  }
  double rescale() const { return n_rescale.eval(dims); }

  bool operator==(const ScalingPlan&) const;
};

// Init part (entries[*].init_var and n_rescale).
ScalingPlan make_init_plan(const ArchSpec& arch, const ScalingStrategy& strategy,
                           const InitConstants& constants);
// Learning-rate factors for one optimizer, one monomial per group.
std::array<Monomial, kNumGroups> make_lr_plan(const ArchSpec& arch, Optimizer optimizer,
                                              const ScalingStrategy& strategy,
                                              const LrConstants& constants = LrConstants::defaults());
Monomial output_rescale_monomial(const ArchSpec& arch, const ScalingStrategy& strategy);
double output_rescale(const ArchSpec& arch, const ScalingStrategy& strategy);

// Init + both optimizers.
ScalingPlan make_plan(const ArchSpec& arch, const ScalingStrategy& strategy,
                      const InitConstants& constants, const LrConstants& lr = LrConstants::defaults());
ScalingPlan make_plan(const ArchSpec& arch, const ScalingStrategy& strategy);

std::string plan_to_json(const ScalingPlan& plan);
ScalingPlan plan_from_json(const std::string& text);

// Reference-layout table: one row per group with initial std and lr factor.
std::string render_plan_table(const ScalingPlan& plan, Optimizer optimizer);
std::string_view group_label(ParamGroup g);

// Order-one constants seen by the infinite-width theory at this plan's n.
// With s = 0 and fan-scaled constants these equal C_G and Λ_G exactly.
struct TheoryConstants {
  GroupArray C{};       // effective init constants (var · fan)
  GroupArray Lambda{};  // effective SGD constants (λ · fan)
  double C_head = 0;        // head cumulative factor
  double Lambda_head_w = 0; // head weight additive factor
  double Lambda_head_b = 0; // head bias additive factor
  double C_emb = 0;         // stem embedding constant (Patch or WordEmb)
  double Lambda_emb = 0;
};
TheoryConstants theory_constants(const ScalingPlan& plan, const ArchSpec& arch);

}  // namespace wf

#endif  // WIDEFORMER_PLAN_HPP_
