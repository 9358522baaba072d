#include <cmath>
#include <random>

#include "blocks/reward.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace blocks;
using testutil::state_of;

namespace {

struct Task {
  BoardGeometry g = testutil::desk_geometry();
  WorldState start = state_of({{0, 2}, {2, 0}, {4, 4}});
  WorldState goal = state_of({{3, 2}, {2, 0}, {4, 4}});
  RewardSpec spec;
  Task() {
    spec.goal = goal;
    spec.demonstration = make_demonstration(start, goal, g);
  }
};

ShapingInputs step_of(const WorldState& prev_s, const Action& prev_a, const WorldState& s,
                      const Action& a, const BoardGeometry& g) {
  return {prev_s, prev_a, s, a, apply(s, a, g)};
}

}  // namespace

TEST_CASE("problem reward cases") {
  Task t;
  const auto stop_goal = apply(t.goal, Action::stop(), t.g);
  CHECK(problem_reward(t.spec, t.goal, Action::stop(), stop_goal) == 1.0);
  const auto stop_start = apply(t.start, Action::stop(), t.g);
  CHECK(problem_reward(t.spec, t.start, Action::stop(), stop_start) == -1.0);
  const Action blocked = Action::move(0, Direction::West);
  CHECK(problem_reward(t.spec, t.start, blocked, apply(t.start, blocked, t.g)) == -1.0);
  const Action ok = Action::move(0, Direction::East);
  CHECK(problem_reward(t.spec, t.start, ok, apply(t.start, ok, t.g)) == -0.02);

  RewardSpec dist = t.spec;
  dist.distance_reward = true;
  CHECK(reward_terms(dist, step_of(t.start, Action::none(), t.start, ok, t.g)).problem == -2.0);
}

TEST_CASE("distance potential and its shaping term") {
  Task t;
  CHECK(phi1(t.spec, t.goal) == 0.0);
  CHECK(phi1(t.spec, t.start) == -3.0);
  const auto next = apply(t.start, Action::move(0, Direction::East), t.g).next_state;
  CHECK(f1(t.spec, t.start, next) == 1.0);
  CHECK(f1(t.spec, t.start, t.start) == 0.0);
}

TEST_CASE("demonstration potential and look-back term") {
  Task t;
  const Action east = Action::move(0, Direction::East);
  CHECK(phi2(t.spec, t.start, east) == 1.0);
  CHECK(phi2(t.spec, t.start, Action::move(0, Direction::North)) == -0.02);
  CHECK(phi2(t.spec, t.start, Action::none()) == -0.02);
  const auto far = state_of({{0, 4}, {2, 0}, {4, 4}});
  CHECK(phi2(t.spec, far, east) == -0.02);

  const auto s1 = apply(t.start, east, t.g).next_state;
  CHECK(f2(t.spec, step_of(t.start, east, s1, east, t.g)) == 0.0);
  CHECK(f2(t.spec, step_of(t.start, east, s1, Action::stop(), t.g)) ==
        doctest::Approx(-1.02).epsilon(1e-15));
}

TEST_CASE("disabled shaping leaves the problem reward") {
  Task t;
  const Action east = Action::move(0, Direction::East);
  const auto in = step_of(t.start, Action::none(), t.start, east, t.g);
  CHECK(shaped_reward(t.spec, in) == problem_reward(t.spec, t.start, east, in.step));
}

TEST_CASE("failed action on a demonstration state with the wrong action") {
  const auto g = testutil::desk_geometry();
  const auto s = state_of({{1, 2}, {2, 2}, {4, 4}});
  RewardSpec spec;
  spec.goal = state_of({{1, 3}, {2, 2}, {4, 4}});
  spec.demonstration = make_demonstration(s, spec.goal, g);
  spec.enable_f1 = true;
  spec.enable_f2 = true;
  const Action south = Action::move(0, Direction::South);
  const Action blocked = Action::move(0, Direction::East);
  const auto in = step_of(s, south, s, blocked, g);
  REQUIRE(in.step.failed);
  const auto terms = reward_terms(spec, in);
  CHECK(terms.problem == -1.0);
  CHECK(terms.f1 == 0.0);
  CHECK(terms.f2 == doctest::Approx(-0.02 - 1.0).epsilon(1e-15));
  CHECK(terms.total() == doctest::Approx(-2.02).epsilon(1e-15));
}

TEST_CASE("demonstration replay reward telescopes") {
  Task t;
  t.spec.enable_f1 = true;
  t.spec.enable_f2 = true;
  const auto& steps = t.spec.demonstration->steps;
  const int m = static_cast<int>(steps.size());
  double total = 0.0;
  WorldState prev_s = t.start;
  Action prev_a = Action::none();
  for (const auto& [s, a] : steps) {
    total += shaped_reward(t.spec, step_of(prev_s, prev_a, s, a, t.g));
    prev_s = s;
    prev_a = a;
  }
  const double phi2_end = phi2(t.spec, steps.back().first, steps.back().second);
  const double phi2_start = phi2(t.spec, t.start, Action::none());
  const double expected = (1.0 - 0.02 * (m - 1)) +
                          (phi1(t.spec, steps.back().first) - phi1(t.spec, t.start)) +
                          (phi2_end - phi2_start);
  CHECK(total == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("shaping terms telescope over random trajectories") {
  const auto g = testutil::desk_geometry();
  SyntheticSpec syn;
  syn.seed = 12;
  syn.count = 50;
  const auto examples = generate_synthetic(syn, g);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& ex = examples[trial % examples.size()];
    RewardSpec spec;
    spec.goal = ex.goal;
    spec.demonstration = ex.demonstration;
    WorldState s = ex.start, prev_s = ex.start;
    Action prev_a = Action::none();
    double sum1 = 0.0, sum2 = 0.0;
    const int len = 1 + static_cast<int>(rng() % 15);
    std::uniform_int_distribution<int> pick(0, g.num_actions() - 2);
    for (int j = 0; j < len; ++j) {
      const Action a = Action::from_index(pick(rng), g.num_blocks());
      const auto in = step_of(prev_s, prev_a, s, a, g);
      sum1 += f1(spec, s, in.step.next_state);
      sum2 += f2(spec, in);
      prev_s = s;
      prev_a = a;
      s = in.step.next_state;
    }
    CHECK(std::abs(sum1 - (phi1(spec, s) - phi1(spec, ex.start))) < 1e-12);
    CHECK(std::abs(sum2 - (phi2(spec, prev_s, prev_a) - phi2(spec, ex.start, Action::none()))) <
          1e-12);
  }
}

TEST_CASE("reward spec validation") {
  RewardSpec spec;
  spec.enable_f2 = true;
  CHECK_THROWS(spec.validate());
  spec.enable_f2 = false;
  spec.delta = -1.0;
  CHECK_THROWS(spec.validate());
}
