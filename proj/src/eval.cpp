#include "blocks/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>

#include "blocks/learn.hpp"
#include "blocks/rng.hpp"
#include "json.hpp"

namespace blocks {

namespace {

double head_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

ActionDistribution average_distribution(
    const std::vector<const PolicyParams*>& members, const AgentContext& ctx,
    const std::vector<std::shared_ptr<const InstructionTrace>>* traces) {
  ActionDistribution dist;
  for (size_t i = 0; i < members.size(); ++i) {
    const auto d = distribution_of(forward(*members[i], ctx, traces ? (*traces)[i] : nullptr));
    if (i == 0) {
      dist = d;
      continue;
    }
    for (size_t k = 0; k < d.dir_probs.size(); ++k) dist.dir_probs[k] += d.dir_probs[k];
    for (size_t k = 0; k < d.block_probs.size(); ++k) dist.block_probs[k] += d.block_probs[k];
  }
  if (members.size() > 1) {
    const double inv = 1.0 / static_cast<double>(members.size());
    for (auto& x : dist.dir_probs) x *= inv;
    for (auto& x : dist.block_probs) x *= inv;
  }
  return dist;
}

class PolicyEpisode : public Episode {
 public:
  PolicyEpisode(const std::vector<const PolicyParams*>& members, Decode mode,
                const Instruction& ins)
      : members_(members), mode_(mode) {
    for (const auto* m : members_) traces_.push_back(encode_instruction(*m, ins));
  }

  Action act(const AgentContext& ctx, const WorldState&, Rng& rng) override {
    const auto dist = average_distribution(members_, ctx, &traces_);
    entropy_ = head_entropy(dist.dir_probs) + head_entropy(dist.block_probs);
    return mode_ == Decode::Greedy ? greedy(dist) : sample(dist, rng);
  }

  double last_entropy() const override { return entropy_; }

 private:
  std::vector<const PolicyParams*> members_;
  Decode mode_;
  std::vector<std::shared_ptr<const InstructionTrace>> traces_;
  double entropy_ = 0.0;
};

class PolicyAgent : public Agent {
 public:
  PolicyAgent(std::vector<const PolicyParams*> members, Decode mode)
      : members_(std::move(members)), mode_(mode) {
    if (members_.empty()) throw Error("policy agent needs at least one model");
    for (const auto* m : members_) {
      if (m->dims.head != HeadKind::Factored) throw ShapeError("policy agent needs a factored head");
      if (!(m->dims == members_.front()->dims))
        throw ShapeError("ensemble members have different dimensions");
    }
  }
  std::unique_ptr<Episode> begin(const TaskExample& ex, const BoardGeometry&) const override {
    return std::make_unique<PolicyEpisode>(members_, mode_, ex.instruction);
  }

 private:
  std::vector<const PolicyParams*> members_;
  Decode mode_;
};

class QEpisode : public Episode {
 public:
  QEpisode(const PolicyParams* q, const Instruction& ins)
      : q_(q), trace_(encode_instruction(*q, ins)) {}
  Action act(const AgentContext& ctx, const WorldState&, Rng&) override {
    const auto t = forward(*q_, ctx, trace_);
    const auto best = std::max_element(t.out_a.begin(), t.out_a.end()) - t.out_a.begin();
    return Action::from_index(static_cast<int>(best), q_->dims.num_blocks);
  }

 private:
  const PolicyParams* q_;
  std::shared_ptr<const InstructionTrace> trace_;
};

class QAgent : public Agent {
 public:
  explicit QAgent(const PolicyParams* q) : q_(q) {
    if (q_->dims.head != HeadKind::QValues) throw ShapeError("q agent needs a value head");
  }
  std::unique_ptr<Episode> begin(const TaskExample& ex, const BoardGeometry&) const override {
    return std::make_unique<QEpisode>(q_, ex.instruction);
  }

 private:
  const PolicyParams* q_;
};

// Plays back a fixed action list, then stops.
class ScriptEpisode : public Episode {
 public:
  explicit ScriptEpisode(std::vector<Action> actions) : actions_(std::move(actions)) {}
  Action act(const AgentContext&, const WorldState&, Rng&) override {
    if (next_ >= actions_.size()) return Action::stop();
    return actions_[next_++];
  }

 private:
  std::vector<Action> actions_;
  size_t next_ = 0;
};

std::vector<Action> actions_of(const Execution& e) {
  std::vector<Action> out;
  for (const auto& [s, a] : e.steps) out.push_back(a);
  return out;
}

class PlannerAgent : public Agent {
 public:
  explicit PlannerAgent(const PolicyParams* p) : p_(p) {
    if (p_->dims.head != HeadKind::Planner) throw ShapeError("planner agent needs a planner head");
  }
  std::unique_ptr<Episode> begin(const TaskExample& ex, const BoardGeometry& g) const override {
    const auto ctx = start_context(ex, g, p_->dims.history);
    const auto goal = planner_goal(*p_, ctx, ex.start, g);
    std::vector<Action> plan = {Action::stop()};
    if (!(goal == ex.start)) {
      try {
        plan = actions_of(make_demonstration(ex.start, goal, g));
      } catch (const NoPath&) {
      }
    }
    return std::make_unique<ScriptEpisode>(std::move(plan));
  }

 private:
  const PolicyParams* p_;
};

class StopAgent : public Agent {
 public:
  std::unique_ptr<Episode> begin(const TaskExample&, const BoardGeometry&) const override {
    return std::make_unique<ScriptEpisode>(std::vector<Action>{Action::stop()});
  }
};

class RandomEpisode : public Episode {
 public:
  explicit RandomEpisode(int num_actions) : num_actions_(num_actions) {}
  Action act(const AgentContext&, const WorldState& state, Rng& rng) override {
    std::uniform_int_distribution<int> pick(0, num_actions_ - 1);
    return Action::from_index(pick(rng), state.num_blocks());
  }

 private:
  int num_actions_;
};

class RandomAgent : public Agent {
 public:
  std::unique_ptr<Episode> begin(const TaskExample&, const BoardGeometry& g) const override {
    return std::make_unique<RandomEpisode>(g.num_actions());
  }
};

class DemonstrationAgent : public Agent {
 public:
  std::unique_ptr<Episode> begin(const TaskExample& ex, const BoardGeometry& g) const override {
    const Execution demo =
        ex.demonstration ? *ex.demonstration : make_demonstration(ex.start, ex.goal, g);
    return std::make_unique<ScriptEpisode>(actions_of(demo));
  }
};

}  // namespace

std::unique_ptr<Agent> policy_agent(std::vector<const PolicyParams*> members, Decode mode) {
  return std::make_unique<PolicyAgent>(std::move(members), mode);
}
std::unique_ptr<Agent> q_agent(const PolicyParams* q) { return std::make_unique<QAgent>(q); }
std::unique_ptr<Agent> planner_agent(const PolicyParams* p) {
  return std::make_unique<PlannerAgent>(p);
}
std::unique_ptr<Agent> stop_baseline() { return std::make_unique<StopAgent>(); }
std::unique_ptr<Agent> random_baseline() { return std::make_unique<RandomAgent>(); }
std::unique_ptr<Agent> demonstration_agent() { return std::make_unique<DemonstrationAgent>(); }

ActionDistribution ensemble_distribution(const std::vector<const PolicyParams*>& members,
                                         const AgentContext& ctx) {
  return average_distribution(members, ctx, nullptr);
}

double lower_median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(k), values.end());
  return values[k];
}

SuiteAggregate aggregate_of(const std::vector<EpisodeReport>& episodes) {
  SuiteAggregate a;
  if (episodes.empty()) return a;
  std::vector<double> errors, mins;
  double completed = 0, horizon = 0, steps = 0, entropy = 0, err_sum = 0, min_sum = 0;
  for (const auto& e : episodes) {
    errors.push_back(e.final_error);
    mins.push_back(e.min_distance);
    err_sum += e.final_error;
    min_sum += e.min_distance;
    steps += e.steps;
    entropy += e.mean_entropy;
    completed += e.completed ? 1 : 0;
    horizon += e.hit_horizon ? 1 : 0;
  }
  const double n = static_cast<double>(episodes.size());
  a.mean_error = err_sum / n;
  a.median_error = lower_median(errors);
  a.mean_min_distance = min_sum / n;
  a.median_min_distance = lower_median(mins);
  a.completion_rate = completed / n;
  a.mean_steps = steps / n;
  a.horizon_rate = horizon / n;
  a.mean_entropy = entropy / n;
  return a;
}

EpisodeReport run_episode(const Agent& agent, const TaskExample& ex, const BoardGeometry& g,
                          const EvalOptions& opt, Rng& rng) {
  EpisodeReport rep;
  rep.id = ex.id;
  auto ep = agent.begin(ex, g);
  ContextBuilder cb(ex.instruction, g, opt.history);
  cb.reset(ex.start);
  WorldState state = ex.start;
  double min_d = state_distance(state, ex.goal);
  bool stopped = false;
  double entropy = 0.0;
  while (rep.steps < opt.horizon) {
    const Action a = ep->act(cb.context(), state, rng);
    ++rep.steps;
    entropy += ep->last_entropy();
    if (a.is_stop()) {
      stopped = true;
      break;
    }
    state = apply(state, a, g).next_state;
    cb.advance(a, state);
    min_d = std::min(min_d, state_distance(state, ex.goal));
  }
  rep.final_error = state_distance(state, ex.goal);
  rep.min_distance = min_d;
  rep.completed = stopped && states_equal_relaxed(state, ex.goal);
  rep.hit_horizon = !stopped && rep.steps == opt.horizon;
  rep.mean_entropy = rep.steps > 0 ? entropy / rep.steps : 0.0;
  return rep;
}

SuiteReport evaluate(const Agent& agent, const std::vector<TaskExample>& examples,
                     const BoardGeometry& g, const EvalOptions& opt) {
  SuiteReport r;
  r.episodes.resize(examples.size());
  const long n = static_cast<long>(examples.size());
  std::vector<std::exception_ptr> errors(examples.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      Rng rng = derive_rng(opt.seed, "eval", {static_cast<std::uint64_t>(i)});
      r.episodes[i] = run_episode(agent, examples[i], g, opt, rng);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  r.aggregate = aggregate_of(r.episodes);
  return r;
}

std::string report_to_json(const SuiteReport& r) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  ojson eps = ojson::array();
  for (const auto& e : r.episodes)
    eps.push_back({{"id", e.id},
                   {"final_error", e.final_error},
                   {"min_distance", e.min_distance},
                   {"steps", e.steps},
                   {"completed", e.completed},
                   {"hit_horizon", e.hit_horizon}});
  const auto& a = r.aggregate;
  j["aggregate"] = {{"episodes", r.episodes.size()},
                    {"mean_error", a.mean_error},
                    {"median_error", a.median_error},
                    {"mean_min_distance", a.mean_min_distance},
                    {"median_min_distance", a.median_min_distance},
                    {"completion_rate", a.completion_rate},
                    {"mean_steps", a.mean_steps},
                    {"horizon_rate", a.horizon_rate}};
  j["episodes"] = eps;
  return j.dump(2) + "\n";
}

std::string aggregate_csv_header() {
  return "mean_error,median_error,mean_min_distance,median_min_distance,completion_rate,"
         "mean_steps,horizon_rate";
}

std::string aggregate_csv_row(const SuiteAggregate& a) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", a.mean_error,
                a.median_error, a.mean_min_distance, a.median_min_distance, a.completion_rate,
                a.mean_steps, a.horizon_rate);
  return buf;
}

}  // namespace blocks
