#include "blocks/reward.hpp"

namespace blocks {

void RewardSpec::validate() const {
  if (delta < 0.0 || delta_f < 0.0) throw Error("reward penalties must be non-negative");
  if (!(eta > 0.0)) throw Error("eta must be positive");
  if (enable_f2 && !demonstration) throw Error("F2 shaping needs a demonstration");
}

double problem_reward(const RewardSpec& spec, const WorldState& state,
                      const Action& action, const StepResult& step) {
  if (action.is_stop()) return states_equal_relaxed(state, spec.goal) ? 1.0 : -1.0;
  if (step.failed) return -1.0;
  return -spec.delta;
}

double phi1(const RewardSpec& spec, const WorldState& state) {
  return -spec.eta * state_distance(state, spec.goal);
}

double f1(const RewardSpec& spec, const WorldState& state, const WorldState& next_state) {
  return phi1(spec, next_state) - phi1(spec, state);
}

double phi2(const RewardSpec& spec, const WorldState& state, const Action& action) {
  if (!spec.demonstration) throw Error("phi2 needs a demonstration");
  if (action.is_none()) return -spec.delta_f;
  const auto& steps = spec.demonstration->steps;
  int best = -1;
  double best_dist = 0.0;
  for (int j = 0; j < static_cast<int>(steps.size()); ++j) {
    const double d = state_distance(steps[j].first, state);
    if (best < 0 || d < best_dist) {
      best = j;
      best_dist = d;
    }
  }
  if (best >= 0 && spec.eta * best_dist < 1.0 && steps[best].second == action) return 1.0;
  return -spec.delta_f;
}

double f2(const RewardSpec& spec, const ShapingInputs& in) {
  return phi2(spec, in.state, in.action) - phi2(spec, in.prev_state, in.prev_action);
}

RewardBreakdown reward_terms(const RewardSpec& spec, const ShapingInputs& in) {
  RewardBreakdown r;
  if (spec.distance_reward)
    r.problem = -state_distance(in.step.next_state, spec.goal);
  else
    r.problem = problem_reward(spec, in.state, in.action, in.step);
  if (spec.enable_f1) r.f1 = f1(spec, in.state, in.step.next_state);
  if (spec.enable_f2) r.f2 = f2(spec, in);
  return r;
}

double shaped_reward(const RewardSpec& spec, const ShapingInputs& in) {
  return reward_terms(spec, in).total();
}

}  // namespace blocks
