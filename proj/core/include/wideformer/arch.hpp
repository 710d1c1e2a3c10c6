// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Architecture description and parameter groups.

#ifndef WIDEFORMER_ARCH_HPP_
#define WIDEFORMER_ARCH_HPP_

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wf {

// Raised for malformed arguments; CLI maps it to exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numeric stage produces a non-finite or invalid value.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

enum class Modality { Vision, Language };
enum class BlockKind { MhsaBidirectional, MhsaMasked, Mlp };
enum class Activation { Relu, Gelu, Tanh, Identity };
enum class Pooling { None, TokenMean };

enum class ParamGroup {
  Patch, WordEmb, PosEmb, Q, K, V, U, W, X, HeadW, HeadB
};
inline constexpr int kNumGroups = 11;
inline constexpr std::array<ParamGroup, kNumGroups> kAllGroups = {
    ParamGroup::Patch, ParamGroup::WordEmb, ParamGroup::PosEmb,
    ParamGroup::Q,     ParamGroup::K,       ParamGroup::V,
    ParamGroup::U,     ParamGroup::W,       ParamGroup::X,
    ParamGroup::HeadW, ParamGroup::HeadB};

std::string_view to_string(ParamGroup g);
std::string_view to_string(Modality m);
std::string_view to_string(BlockKind b);
std::string_view to_string(Activation a);
std::string_view to_string(Pooling p);

ParamGroup parse_group(std::string_view s);
Modality parse_modality(std::string_view s);
BlockKind parse_block(std::string_view s);
Activation parse_activation(std::string_view s);
Pooling parse_pooling(std::string_view s);

inline bool is_head_group(ParamGroup g) {
  return g == ParamGroup::HeadW || g == ParamGroup::HeadB;
}
inline bool is_mhsa(BlockKind b) { return b != BlockKind::Mlp; }

struct ArchSpec {
  Modality modality = Modality::Vision;
  int n = 64;      // embedding width
  int H = 4;       // heads
  int M = 4;       // MLP multiplier
  int T = 4;       // tokens
  int n_in = 16;   // n_patch or n_vocab
  int n_out = 8;   // output dim (vision); language uses n_vocab
  std::vector<BlockKind> blocks{BlockKind::MhsaBidirectional, BlockKind::Mlp};
  double eps_ln = 0.0;
  Activation activation = Activation::Gelu;
  Pooling pooling = Pooling::None;
  bool weight_tying = false;

  int depth() const { return static_cast<int>(blocks.size()); }
  int C() const { return n / H; }
  // The language head is the transposed word embedding when tied.
  bool tied_head() const {
    return modality == Modality::Language && weight_tying;
  }
  int output_dim() const { return tied_head() ? n_in : n_out; }

  // Throws InputError on any violated invariant.
  void validate() const;

  // Parameter groups that exist for this architecture.
  std::vector<ParamGroup> groups() const;
  bool has_group(ParamGroup g) const;

  ArchSpec with_width(int width, int heads) const {
    ArchSpec a = *this;
    a.n = width;
    a.H = heads;
    return a;
  }
};

}  // namespace wf

#endif  // WIDEFORMER_ARCH_HPP_
