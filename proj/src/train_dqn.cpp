#include <algorithm>
#include <chrono>
#include <cmath>

#include "blocks/learn.hpp"
#include "blocks/rng.hpp"
#include "learn_internal.hpp"

namespace blocks {

ReplayBuffer::ReplayBuffer(size_t capacity, double exponent)
    : capacity_(capacity), exponent_(exponent) {
  if (capacity_ == 0) throw ConfigError("replay_capacity: must be >= 1");
}

void ReplayBuffer::add(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.emplace_back(std::move(t), max_priority_);
}

void ReplayBuffer::set_priority(size_t i, double td_error) {
  const double p = std::abs(td_error) + 1e-6;
  items_.at(i).second = p;
  max_priority_ = std::max(max_priority_, p);
}

std::vector<size_t> ReplayBuffer::sample(size_t k, Rng& rng) const {
  std::vector<size_t> out;
  if (items_.empty()) return out;
  std::vector<double> cum(items_.size());
  double total = 0.0;
  for (size_t i = 0; i < items_.size(); ++i) {
    total += std::pow(items_[i].second, exponent_);
    cum[i] = total;
  }
  std::uniform_real_distribution<double> u(0.0, total);
  for (size_t n = 0; n < k; ++n) {
    const double x = u(rng);
    auto it = std::upper_bound(cum.begin(), cum.end(), x);
    out.push_back(std::min(static_cast<size_t>(it - cum.begin()), items_.size() - 1));
  }
  return out;
}

std::vector<double> q_values(const PolicyParams& p, const AgentContext& ctx) {
  if (p.dims.head != HeadKind::QValues) throw ShapeError("not a value network");
  return forward(p, ctx).out_a;
}

std::vector<double> DqnLearner::update(const std::vector<const Transition*>& batch,
                                       const std::vector<TaskExample>& examples,
                                       const BoardGeometry& g) {
  ParamSet grads = online.tensors.zeros_like();
  std::vector<double> td(batch.size());
  const double w = 1.0 / static_cast<double>(batch.size());
  const int nb = online.dims.num_blocks;
  for (size_t k = 0; k < batch.size(); ++k) {
    const Transition& t = *batch[k];
    const Instruction& ins = examples.at(t.example).instruction;
    const auto tr = forward(online, window_context(ins, t.window, t.prev_action, g));
    double y = t.reward;
    if (!t.terminal) {
      const auto next = q_values(target, window_context(ins, t.next_window, t.action, g));
      y += gamma * *std::max_element(next.begin(), next.end());
    }
    const int a = t.action.index(nb);
    const double delta = y - tr.out_a[a];
    td[k] = std::abs(delta);
    // ascent on -0.5 * delta^2
    std::vector<double> d_out(tr.out_a.size(), 0.0);
    d_out[a] = delta * w;
    backward_outputs(online, tr, d_out, {}, grads);
  }
  adam_step(online.tensors, grads, adam, lr, clip_norm);
  online.touch();
  return td;
}

TrainResult train_dqn(const Dataset& data, const LearnConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  detail::check_dataset(data);
  if (hooks.resume) throw ConfigError("resume: not supported for dqn");
  const auto mask = demo_mask(data.train.size(), cfg.demo_fraction, cfg.seed);
  std::vector<RewardSpec> specs;
  for (size_t i = 0; i < data.train.size(); ++i)
    specs.push_back(reward_spec_for(data.train[i], cfg, mask[i]));

  DqnLearner learner;
  learner.online = make_policy(data, cfg, HeadKind::QValues);
  learner.sync_target();
  learner.adam = AdamState::for_params(learner.online.tensors);
  learner.gamma = cfg.gamma;
  learner.lr = cfg.lr_dqn;
  learner.clip_norm = cfg.clip_norm;
  ReplayBuffer replay(static_cast<size_t>(cfg.replay_capacity), cfg.priority_exponent);

  const auto& g = data.geometry;
  const int na = g.num_actions();
  TrainState st;
  st.params = learner.online;
  const auto started = std::chrono::steady_clock::now();
  const auto agent = q_agent(&st.params);
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto order = detail::shuffled(data.train.size(), cfg.seed, "dqn-order", e);
    for (size_t i : order) {
      const auto& ex = data.train[i];
      Rng rng = derive_rng(cfg.seed, "dqn", {i, static_cast<std::uint64_t>(e)});
      std::vector<std::optional<WorldState>> window(cfg.history + 1);
      window.back() = ex.start;
      WorldState state = ex.start, prev_state = ex.start;
      Action prev = Action::none();
      for (int j = 0; j < cfg.horizon; ++j) {
        const double frac = std::min(
            1.0, static_cast<double>(st.global_step) / static_cast<double>(cfg.epsilon_decay_steps));
        const double eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
        Action a;
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps) {
          a = Action::from_index(std::uniform_int_distribution<int>(0, na - 1)(rng),
                                 g.num_blocks());
        } else {
          const auto q = q_values(learner.online, window_context(ex.instruction, window, prev, g));
          a = Action::from_index(static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin()),
                                 g.num_blocks());
        }
        StepResult step = apply(state, a, g);
        Transition t;
        t.example = static_cast<int>(i);
        t.window = window;
        t.prev_action = prev;
        t.action = a;
        t.reward = shaped_reward(specs[i], ShapingInputs{prev_state, prev, state, a, step});
        t.terminal = a.is_stop();
        auto next_window = window;
        next_window.erase(next_window.begin());
        next_window.push_back(step.next_state);
        t.next_window = next_window;
        replay.add(std::move(t));
        ++st.global_step;

        if (replay.size() >= static_cast<size_t>(cfg.batch_size) &&
            st.global_step % static_cast<std::uint64_t>(cfg.dqn_update_every) == 0) {
          const auto idx = replay.sample(cfg.batch_size, rng);
          std::vector<const Transition*> batch;
          for (size_t k : idx) batch.push_back(&replay.at(k));
          const auto td = learner.update(batch, data.train, g);
          for (size_t k = 0; k < idx.size(); ++k) replay.set_priority(idx[k], td[k]);
        }
        if (a.is_stop()) break;
        prev_state = state;
        prev = a;
        state = std::move(step.next_state);
        window = std::move(next_window);
      }
    }
    learner.sync_target();
    st.params = learner.online;
    detail::finish_epoch(st, *agent, data, cfg, e, started, hooks);
  }
  return detail::result_of(st, cfg);
}

}  // namespace blocks
