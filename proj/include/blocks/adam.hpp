#pragma once

#include <cstdint>

#include "blocks/tensor.hpp"

namespace blocks {

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ParamSet& params);
};

enum class AdamOutcome { Applied, SkippedNonFinite };

// Gradient ascent: params += lr * mhat / (sqrt(vhat) + eps), after scaling the
// gradient to at most clip_norm in global L2 norm (clip_norm <= 0 disables).
// Non-finite gradients leave params and state untouched.
AdamOutcome adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
                      double lr, double clip_norm);

}  // namespace blocks
