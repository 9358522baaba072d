#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "blocks/adam.hpp"
#include "blocks/env.hpp"
#include "blocks/eval.hpp"
#include "blocks/lang.hpp"
#include "blocks/policy.hpp"
#include "blocks/reward.hpp"

namespace blocks {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct LearnConfig {
  int epochs = 10;
  int horizon = 40;
  double entropy_weight = 0.1;
  double lr_supervised = 0.001;
  double lr_policy = 0.00025;
  double clip_norm = 5.0;
  int batch_size = 32;
  int history = 4;
  std::uint64_t seed = 1;

  bool enable_f1 = true;
  bool enable_f2 = true;
  bool distance_reward = false;
  double delta = 0.02;
  double delta_f = 0.02;
  double eta = 1.0;

  bool supervised_init = true;
  int supervised_init_epochs = 2;
  bool reinit_direction_head = true;
  double demo_fraction = 1.0;  // rho
  // Rollouts per policy-gradient update; 1 follows the algorithm listing.
  int pg_batch = 1;

  PolicyDims dims;  // vocab_size, num_blocks, board and history are filled in from the data
  InitScheme init = InitScheme::TruncatedNormal;

  // DQN
  int replay_capacity = 2000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  int epsilon_decay_steps = 100000;
  double gamma = 0.99;
  double priority_exponent = 0.6;
  int dqn_update_every = 4;
  double lr_dqn = 0.00025;

  // Keep the epoch with the best monitor completion (then error), not the last one.
  bool select_best = true;
  bool record_time = false;

  void validate() const;
};

struct MetricsRow {
  int epoch = 0;
  double mean_error = 0.0;
  double median_error = 0.0;
  double mean_min_distance = 0.0;
  double completion_rate = 0.0;
  double mean_steps = 0.0;
  double mean_entropy = 0.0;
  double wall_seconds = 0.0;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

struct Dataset {
  BoardGeometry geometry;
  Vocabulary vocab;
  std::vector<TaskExample> train;
  std::vector<TaskExample> monitor;  // evaluated after every epoch; train set when empty
};

// Everything needed to continue training after an interruption.
struct TrainState {
  PolicyParams params;
  AdamState adam;
  int epochs_done = 0;
  PolicyParams best;
  double best_completion = 0.0;
  double best_error = 0.0;
  int best_epoch = -1;
  std::uint64_t global_step = 0;
  std::vector<MetricsRow> log;
};

std::string serialize_train_state(const TrainState& s);
TrainState deserialize_train_state(const std::string& bytes);

struct TrainResult {
  PolicyParams params;  // best monitored epoch when select_best, else last
  std::vector<MetricsRow> log;
  std::vector<double> losses;  // supervised objectives per epoch
  int skipped_updates = 0;
};

struct TrainHooks {
  // Called after every epoch with the full state; used for logs and checkpoints.
  std::function<void(const TrainState&)> on_epoch;
  const TrainState* resume = nullptr;
};

// ---------------------------------------------------------------------------
// Rollouts

enum class TerminalReason { Stop, Horizon };

struct StepRecord {
  AgentContext context;
  Action action;
  RewardBreakdown reward;
  double log_prob = 0.0;
  double entropy = 0.0;
  bool failed = false;
  ForwardTrace trace;
};

struct Rollout {
  std::vector<StepRecord> steps;
  TerminalReason reason = TerminalReason::Horizon;
  WorldState final_state;
  double total_reward() const;
};

RewardSpec reward_spec_for(const TaskExample& ex, const LearnConfig& cfg, bool with_demo);

Rollout policy_rollout(const PolicyParams& p, const TaskExample& ex, const BoardGeometry& g,
                       const RewardSpec& reward, int horizon, Decode mode, Rng& rng);

// Gradient of the mean over steps of w_j * grad log pi + lambda * grad H,
// with w_j the immediate reward (contextual bandit) or the rollout total.
enum class CreditAssignment { Immediate, Total };
ParamSet rollout_gradient(const PolicyParams& p, const Rollout& r, CreditAssignment credit,
                          double entropy_weight);

// Indices of train examples keeping their demonstration under fraction rho.
std::vector<bool> demo_mask(size_t n, double rho, std::uint64_t seed);

PolicyParams make_policy(const Dataset& data, const LearnConfig& cfg, HeadKind head);

// Contexts along a demonstration, replayed with annotated previous actions.
AgentContext demonstration_context(const TaskExample& ex, int step, const BoardGeometry& g,
                                   int history);

// ---------------------------------------------------------------------------
// Trainers

TrainResult train_cb_policy_gradient(const Dataset& data, const LearnConfig& cfg,
                                     const TrainHooks& hooks = {});
TrainResult train_reinforce(const Dataset& data, const LearnConfig& cfg,
                            const TrainHooks& hooks = {});
TrainResult train_supervised(const Dataset& data, const LearnConfig& cfg,
                             const TrainHooks& hooks = {});
// Continues from init (used for supervised initialization).
TrainResult train_supervised_from(PolicyParams init, const Dataset& data,
                                  const LearnConfig& cfg, int epochs,
                                  const std::vector<bool>& mask, bool monitor_each_epoch);
double supervised_objective(const PolicyParams& p, const Dataset& data, const LearnConfig& cfg,
                            const std::vector<bool>& mask);

// Planner: block classification plus target-cell regression.
struct PlannerTarget {
  int block = 0;
  double col = 0.0;
  double row = 0.0;
};
PlannerTarget planner_target(const TaskExample& ex);
AgentContext start_context(const TaskExample& ex, const BoardGeometry& g, int history);
// Loss = -log p(block) + squared distance of the predicted target; gradients
// of the negated loss are accumulated into grads.
double planner_loss(const PolicyParams& p, const AgentContext& ctx, const PlannerTarget& t);
double accumulate_planner_gradient(const PolicyParams& p, const AgentContext& ctx,
                                   const PlannerTarget& t, ParamSet& grads);
TrainResult train_planner_supervised(const Dataset& data, const LearnConfig& cfg,
                                     const TrainHooks& hooks = {});
// Predicted goal state: the chosen block snapped to the nearest free cell.
WorldState planner_goal(const PolicyParams& p, const AgentContext& ctx, const WorldState& start,
                        const BoardGeometry& g);

// ---------------------------------------------------------------------------
// DQN

struct Transition {
  int example = 0;
  // Observation window of the state and of the successor (K+1 entries each,
  // nullopt before the episode started).
  std::vector<std::optional<WorldState>> window;
  Action prev_action;
  Action action;
  double reward = 0.0;
  std::vector<std::optional<WorldState>> next_window;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, double exponent);
  void add(Transition t);  // new entries get the current maximum priority
  size_t size() const { return items_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& at(size_t i) const { return items_[i].first; }
  double priority(size_t i) const { return items_[i].second; }
  void set_priority(size_t i, double td_error);
  // Proportional sampling with probability ~ priority^exponent.
  std::vector<size_t> sample(size_t k, Rng& rng) const;

 private:
  size_t capacity_;
  double exponent_;
  double max_priority_ = 1.0;
  std::deque<std::pair<Transition, double>> items_;
};

AgentContext window_context(const Instruction& ins, const std::vector<std::optional<WorldState>>& w,
                            const Action& prev, const BoardGeometry& g);

struct DqnLearner {
  PolicyParams online;
  PolicyParams target;
  AdamState adam;
  double gamma = 0.99;
  double lr = 0.00025;
  double clip_norm = 5.0;

  void sync_target() { target = online; }
  // One TD(0) step on the batch; returns the absolute TD errors.
  std::vector<double> update(const std::vector<const Transition*>& batch,
                             const std::vector<TaskExample>& examples, const BoardGeometry& g);
};

std::vector<double> q_values(const PolicyParams& p, const AgentContext& ctx);

TrainResult train_dqn(const Dataset& data, const LearnConfig& cfg, const TrainHooks& hooks = {});

}  // namespace blocks
