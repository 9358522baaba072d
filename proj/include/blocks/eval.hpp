#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "blocks/env.hpp"
#include "blocks/lang.hpp"
#include "blocks/policy.hpp"

namespace blocks {

// Per-episode decision maker. Policy agents only look at the context; the
// world state is passed for the oracle-style baselines (demonstration replay,
// planner execution).
class Episode {
 public:
  virtual ~Episode() = default;
  virtual Action act(const AgentContext& ctx, const WorldState& state, Rng& rng) = 0;
  // Entropy of the last decision, 0 for non-stochastic agents.
  virtual double last_entropy() const { return 0.0; }
};

class Agent {
 public:
  virtual ~Agent() = default;
  // Must be safe to call concurrently.
  virtual std::unique_ptr<Episode> begin(const TaskExample& ex, const BoardGeometry& g) const = 0;
};

enum class Decode { Greedy, Sample };

// Factored policy; several members are combined by averaging head probabilities.
std::unique_ptr<Agent> policy_agent(std::vector<const PolicyParams*> members, Decode mode);
std::unique_ptr<Agent> q_agent(const PolicyParams* q);  // argmax over action values
std::unique_ptr<Agent> planner_agent(const PolicyParams* planner);
std::unique_ptr<Agent> stop_baseline();
std::unique_ptr<Agent> random_baseline();
std::unique_ptr<Agent> demonstration_agent();

ActionDistribution ensemble_distribution(const std::vector<const PolicyParams*>& members,
                                         const AgentContext& ctx);

struct EpisodeReport {
  std::string id;
  double final_error = 0.0;
  double min_distance = 0.0;
  int steps = 0;
  bool completed = false;
  bool hit_horizon = false;
  double mean_entropy = 0.0;
};

struct SuiteAggregate {
  double mean_error = 0.0;
  double median_error = 0.0;
  double mean_min_distance = 0.0;
  double median_min_distance = 0.0;
  double completion_rate = 0.0;
  double mean_steps = 0.0;
  double horizon_rate = 0.0;
  double mean_entropy = 0.0;
  friend bool operator==(const SuiteAggregate&, const SuiteAggregate&) = default;
};

struct SuiteReport {
  std::vector<EpisodeReport> episodes;
  SuiteAggregate aggregate;
};

// Lower-middle element for even counts.
double lower_median(std::vector<double> values);
SuiteAggregate aggregate_of(const std::vector<EpisodeReport>& episodes);

struct EvalOptions {
  int horizon = 40;
  int history = 4;
  std::uint64_t seed = 1;
};

EpisodeReport run_episode(const Agent& agent, const TaskExample& ex, const BoardGeometry& g,
                          const EvalOptions& opt, Rng& rng);
SuiteReport evaluate(const Agent& agent, const std::vector<TaskExample>& examples,
                     const BoardGeometry& g, const EvalOptions& opt);

std::string report_to_json(const SuiteReport& r);
std::string aggregate_csv_header();
std::string aggregate_csv_row(const SuiteAggregate& a);

}  // namespace blocks
