#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blocks/env.hpp"

namespace blocks {

class InvalidMdp : public Error {
 public:
  using Error::Error;
};

// Finite MDP for brute-force shaping checks.
struct SmallMDP {
  int n_states = 0;
  int n_actions = 0;
  // transitions[s][a][s'] = P(s' | s, a)
  std::vector<std::vector<std::vector<double>>> transitions;
  std::vector<std::vector<double>> rewards;  // [s][a]
  double gamma = 0.9;

  void validate() const;
};

enum class ShapingMode {
  StatePotential,        // F = gamma*phi(s') - phi(s)
  StateActionPotential,  // look-back: F = gamma*phi(s, a) - phi(s_prev, a_prev)
  Explicit,              // arbitrary F(s, a), not necessarily potential-based
};

struct ShapingTerm {
  ShapingMode mode = ShapingMode::StatePotential;
  std::vector<double> state_potential;                // [s]
  std::vector<std::vector<double>> table;             // [s][a]: phi(s,a) or F(s,a)
};

struct OrderWitness {
  std::uint64_t policy_a = 0;
  std::uint64_t policy_b = 0;
  int start_state = -1;  // -1: aggregate over uniformly chosen start states
  double value_a = 0.0, value_b = 0.0;
  double shaped_a = 0.0, shaped_b = 0.0;
};

struct OrderReport {
  bool preserved = true;
  std::uint64_t policies = 0;
  std::uint64_t comparisons = 0;
  std::uint64_t violations = 0;
  std::optional<OrderWitness> witness;
};

// Discounted values of a deterministic stationary policy, per start state.
std::vector<double> policy_values(const SmallMDP& mdp, const std::vector<int>& policy);
std::vector<double> shaped_policy_values(const SmallMDP& mdp, const ShapingTerm& term,
                                         const std::vector<int>& policy);

// Enumerates every deterministic stationary policy and compares the pairwise
// order under R and R+F, per start state and aggregated, at value tolerance tol.
OrderReport check_shaping_safety(const SmallMDP& mdp, const ShapingTerm& term,
                                 double tol = 1e-9);

SmallMDP random_small_mdp(std::uint64_t seed, int max_states, int max_actions,
                          double gamma);
ShapingTerm random_potential(std::uint64_t seed, const SmallMDP& mdp, ShapingMode mode);

struct TrialSummary {
  int trials = 0;
  int preserved = 0;
  std::vector<std::pair<int, OrderReport>> violations;  // trial index, report
};

TrialSummary run_shaping_trials(int trials, std::uint64_t seed, ShapingMode mode,
                                int max_states = 6, int max_actions = 3,
                                double gamma = 0.9);

// JSON fixture: n_states, n_actions, transitions, rewards, gamma, and either
// potential ([s] or [s][a]) or shaping ([s][a], explicit F).
struct MdpFixture {
  SmallMDP mdp;
  ShapingTerm term;
};
MdpFixture parse_mdp_fixture(const std::string& json_text);
MdpFixture load_mdp_fixture(const std::string& path);
std::string format_order_report(const OrderReport& r);

}  // namespace blocks
