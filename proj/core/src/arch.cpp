// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/arch.hpp"

#include <algorithm>

namespace wf {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             const char* what) {
  for (const auto& [name, value] : table)
    if (name == s) return value;
  throw InputError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, ParamGroup>, kNumGroups> kGroupNames{{
    {"Patch", ParamGroup::Patch}, {"WordEmb", ParamGroup::WordEmb},
    {"PosEmb", ParamGroup::PosEmb}, {"Q", ParamGroup::Q}, {"K", ParamGroup::K},
    {"V", ParamGroup::V}, {"U", ParamGroup::U}, {"W", ParamGroup::W},
    {"X", ParamGroup::X}, {"HeadW", ParamGroup::HeadW}, {"HeadB", ParamGroup::HeadB}}};

constexpr std::array<std::pair<std::string_view, Modality>, 2> kModalities{{
    {"vision", Modality::Vision}, {"language", Modality::Language}}};

constexpr std::array<std::pair<std::string_view, BlockKind>, 3> kBlocks{{
    {"mhsa", BlockKind::MhsaBidirectional},
    {"mhsa_masked", BlockKind::MhsaMasked},
    {"mlp", BlockKind::Mlp}}};

constexpr std::array<std::pair<std::string_view, Activation>, 4> kActivations{{
    {"relu", Activation::Relu}, {"gelu", Activation::Gelu},
    {"tanh", Activation::Tanh}, {"identity", Activation::Identity}}};

constexpr std::array<std::pair<std::string_view, Pooling>, 2> kPoolings{{
    {"none", Pooling::None}, {"token-mean", Pooling::TokenMean}}};

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table)
    if (value == v) return name;
  return "?";
}

}  // namespace

std::string_view to_string(ParamGroup g) { return name_of(g, kGroupNames); }
std::string_view to_string(Modality m) { return name_of(m, kModalities); }
std::string_view to_string(BlockKind b) { return name_of(b, kBlocks); }
std::string_view to_string(Activation a) { return name_of(a, kActivations); }
std::string_view to_string(Pooling p) { return name_of(p, kPoolings); }

ParamGroup parse_group(std::string_view s) { return parse_enum(s, kGroupNames, "parameter group"); }
Modality parse_modality(std::string_view s) { return parse_enum(s, kModalities, "modality"); }
BlockKind parse_block(std::string_view s) { return parse_enum(s, kBlocks, "block kind"); }
Activation parse_activation(std::string_view s) { return parse_enum(s, kActivations, "activation"); }
Pooling parse_pooling(std::string_view s) { return parse_enum(s, kPoolings, "pooling"); }

void ArchSpec::validate() const {
  if (n <= 0 || H <= 0 || M <= 0 || T <= 0 || n_in <= 0 || n_out <= 0)
    throw InputError("all architecture dimensions must be positive");
  if (n % H != 0)
    throw InputError("width n=" + std::to_string(n) + " is not divisible by H=" +
                     std::to_string(H) + "; per-head channels must be an integer");
  if (eps_ln < 0.0) throw InputError("eps_ln must be nonnegative");
  if (weight_tying && modality != Modality::Language)
    throw InputError("weight_tying is only valid for the language modality");
}

std::vector<ParamGroup> ArchSpec::groups() const {
  std::vector<ParamGroup> out;
  for (ParamGroup g : kAllGroups)
    if (has_group(g)) out.push_back(g);
  return out;
}

bool ArchSpec::has_group(ParamGroup g) const {
  const bool any_mhsa = std::any_of(blocks.begin(), blocks.end(), is_mhsa);
  const bool any_mlp = std::any_of(blocks.begin(), blocks.end(),
                                   [](BlockKind b) { return b == BlockKind::Mlp; });
  switch (g) {
    case ParamGroup::Patch: return modality == Modality::Vision;
    case ParamGroup::WordEmb: return modality == Modality::Language;
    case ParamGroup::PosEmb: return true;
    case ParamGroup::Q:
    case ParamGroup::K:
    case ParamGroup::V:
    case ParamGroup::U: return any_mhsa;
    case ParamGroup::W:
    case ParamGroup::X: return any_mlp;
    case ParamGroup::HeadW:
    case ParamGroup::HeadB: return !tied_head();
  }
  return false;
}

}  // namespace wf
