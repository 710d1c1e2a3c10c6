// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// Shared value types: pair-indexed kernels and input batches.

#ifndef WIDEFORMER_TYPES_HPP_
#define WIDEFORMER_TYPES_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "wideformer/arch.hpp"

namespace wf {

enum class KernelRole { G, F, Theta };

// Symmetric matrix over (sample, token) pairs, p = alpha * T + t.
struct PairKernel {
  Eigen::MatrixXd K;
  int samples = 0;
  int T = 0;
  KernelRole role = KernelRole::G;

  int size() const { return samples * T; }
  int pair(int alpha, int t) const { return alpha * T + t; }
  double operator()(int p, int q) const { return K(p, q); }
  double& operator()(int p, int q) { return K(p, q); }

  static PairKernel zeros(int samples, int T, KernelRole role) {
    return {Eigen::MatrixXd::Zero(samples * T, samples * T), samples, T, role};
  }
  PairKernel with(Eigen::MatrixXd m, KernelRole r) const { return {std::move(m), samples, T, r}; }
};

// Mirror the upper triangle so K(p,q) == K(q,p) bit-for-bit.
inline void mirror_upper(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) m(i, j) = m(j, i);
}

// A batch |D| of inputs. Vision: one (T × n_patch) matrix per sample.
// Language: one list of T token ids per sample.
struct Inputs {
  Modality modality = Modality::Vision;
  std::vector<Eigen::MatrixXd> patches;
  std::vector<std::vector<int>> tokens;

  int samples() const {
    return modality == Modality::Vision ? int(patches.size()) : int(tokens.size());
  }
  int T() const;
  // Throws InputError if inconsistent with the architecture.
  void check(const ArchSpec& arch) const;
};

// Deterministic inputs: Gaussian patches, or token ids drawn with repeats
// from the lower half of the vocabulary (the upper half stays free for
// contact-free output channels).
Inputs make_inputs(const ArchSpec& arch, int samples, std::uint64_t seed);

// Output channels used for empirical statistics: the first `count` vision
// outputs, or vocabulary ids not present in the inputs for tied heads.
std::vector<int> contact_free_channels(const ArchSpec& arch, const Inputs& inputs, int count);

}  // namespace wf

#endif  // WIDEFORMER_TYPES_HPP_
