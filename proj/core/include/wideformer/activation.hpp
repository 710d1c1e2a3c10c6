// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef WIDEFORMER_ACTIVATION_HPP_
#define WIDEFORMER_ACTIVATION_HPP_

#include "wideformer/arch.hpp"

namespace wf {

double activate(Activation a, double x);
double activate_deriv(Activation a, double x);

// An activation or its first derivative, as used inside Gaussian integrals.
struct ActFn {
  Activation act = Activation::Identity;
  bool derivative = false;
  double operator()(double x) const {
    return derivative ? activate_deriv(act, x) : activate(act, x);
  }
};

}  // namespace wf

#endif  // WIDEFORMER_ACTIVATION_HPP_
