#pragma once

#include <optional>

#include "blocks/env.hpp"
#include "blocks/lang.hpp"

namespace blocks {

// Per-example reward: problem reward plus optional distance (F1) and
// demonstration look-back (F2) shaping.
struct RewardSpec {
  WorldState goal;
  std::optional<Execution> demonstration;
  double delta = 0.02;
  double delta_f = 0.02;
  double eta = 1.0;
  bool enable_f1 = false;
  bool enable_f2 = false;
  // Replace the problem reward with -distance(next, goal); shaping terms still apply.
  bool distance_reward = false;

  void validate() const;
};

struct ShapingInputs {
  WorldState prev_state;
  Action prev_action;  // NONE at the first step
  WorldState state;
  Action action;
  StepResult step;     // apply(state, action)
};

double problem_reward(const RewardSpec& spec, const WorldState& state,
                      const Action& action, const StepResult& step);

double phi1(const RewardSpec& spec, const WorldState& state);
double f1(const RewardSpec& spec, const WorldState& state, const WorldState& next_state);

// 1.0 when the nearest demonstration state (earliest on ties) is within one
// block width and its action matches, -delta_f otherwise. NONE never matches.
double phi2(const RewardSpec& spec, const WorldState& state, const Action& action);
double f2(const RewardSpec& spec, const ShapingInputs& in);

struct RewardBreakdown {
  double problem = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double total() const { return problem + f1 + f2; }
};

RewardBreakdown reward_terms(const RewardSpec& spec, const ShapingInputs& in);
double shaped_reward(const RewardSpec& spec, const ShapingInputs& in);

}  // namespace blocks
