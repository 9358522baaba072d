#include "blocks/adam.hpp"

#include <cmath>

namespace blocks {

AdamState AdamState::for_params(const ParamSet& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

AdamOutcome adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
                      double lr, double clip_norm) {
  if (!params.same_layout(grads) || !params.same_layout(state.m))
    throw ShapeError("adam: parameter, gradient and moment layouts differ");
  if (!grads.all_finite()) return AdamOutcome::SkippedNonFinite;

  const double norm = std::sqrt(grads.squared_norm());
  const double scale = clip_norm > 0.0 && norm > clip_norm ? clip_norm / norm : 1.0;

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (size_t i = 0; i < params.count(); ++i) {
    double* p = params.at(i).ptr();
    const double* g = grads.at(i).ptr();
    double* m = state.m.at(i).ptr();
    double* v = state.v.at(i).ptr();
    for (size_t e = 0; e < params.at(i).size(); ++e) {
      const double ge = g[e] * scale;
      m[e] = state.beta1 * m[e] + (1.0 - state.beta1) * ge;
      v[e] = state.beta2 * v[e] + (1.0 - state.beta2) * ge * ge;
      p[e] += lr * (m[e] / c1) / (std::sqrt(v[e] / c2) + state.epsilon);
    }
  }
  return AdamOutcome::Applied;
}

}  // namespace blocks
