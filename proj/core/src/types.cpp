// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wideformer/types.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "wideformer/rng.hpp"

namespace wf {

int Inputs::T() const {
  if (samples() == 0) return 0;
  return modality == Modality::Vision ? int(patches[0].rows()) : int(tokens[0].size());
}

void Inputs::check(const ArchSpec& arch) const {
  if (samples() == 0) throw InputError("empty input batch");
  if (modality != arch.modality) throw InputError("input modality does not match the architecture");
  for (int a = 0; a < samples(); ++a) {
    if (modality == Modality::Vision) {
      if (patches[a].rows() != arch.T || patches[a].cols() != arch.n_in)
        throw InputError("vision input must be T x n_patch");
    } else {
      if (int(tokens[a].size()) != arch.T) throw InputError("language input must hold T token ids");
      for (int id : tokens[a])
        if (id < 0 || id >= arch.n_in) throw InputError("token id out of vocabulary range");
    }
  }
}

Inputs make_inputs(const ArchSpec& arch, int samples, std::uint64_t seed) {
  if (samples <= 0) throw InputError("make_inputs: need at least one sample");
  Inputs in;
  in.modality = arch.modality;
  auto gen = rng_stream(seed, Purpose::Inputs, 0);
  if (arch.modality == Modality::Vision) {
    std::normal_distribution<double> nd;
    for (int a = 0; a < samples; ++a) {
      Eigen::MatrixXd x(arch.T, arch.n_in);
      for (int t = 0; t < arch.T; ++t)
        for (int j = 0; j < arch.n_in; ++j) x(t, j) = nd(gen);
      in.patches.push_back(std::move(x));
    }
  } else {
    const int pool = std::max(1, std::min(arch.n_in / 2, arch.T + 1));
    std::uniform_int_distribution<int> ud(0, pool - 1);
    for (int a = 0; a < samples; ++a) {
      std::vector<int> ids(arch.T);
      for (int& id : ids) id = ud(gen);
      in.tokens.push_back(std::move(ids));
    }
  }
  return in;
}

std::vector<int> contact_free_channels(const ArchSpec& arch, const Inputs& inputs, int count) {
  std::vector<int> out;
  if (!arch.tied_head()) {
    for (int i = 0; i < std::min(count, arch.n_out); ++i) out.push_back(i);
    return out;
  }
  std::set<int> used;
  for (const auto& row : inputs.tokens) used.insert(row.begin(), row.end());
  for (int i = arch.n_in - 1; i >= 0 && int(out.size()) < count; --i)
    if (!used.count(i)) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace wf
