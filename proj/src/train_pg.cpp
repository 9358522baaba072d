#include <chrono>

#include "blocks/learn.hpp"
#include "blocks/rng.hpp"
#include "learn_internal.hpp"

namespace blocks {

namespace {

TrainResult train_policy_gradient(const Dataset& data, const LearnConfig& cfg,
                                  const TrainHooks& hooks, CreditAssignment credit) {
  cfg.validate();
  detail::check_dataset(data);
  const auto mask = demo_mask(data.train.size(), cfg.demo_fraction, cfg.seed);
  bool any_demo = false;
  for (size_t i = 0; i < mask.size(); ++i) any_demo |= mask[i] && data.train[i].demonstration;
  if (cfg.enable_f2 && !any_demo)
    throw ConfigError("enable_f2: no training example keeps a demonstration");

  TrainState st;
  int skipped = 0;
  if (hooks.resume) {
    st = *hooks.resume;
  } else {
    st.params = make_policy(data, cfg, HeadKind::Factored);
    if (cfg.supervised_init && cfg.supervised_init_epochs > 0) {
      if (!any_demo) throw ConfigError("supervised_init: no demonstrations to initialize from");
      auto init = train_supervised_from(st.params, data, cfg, cfg.supervised_init_epochs, mask,
                                        false);
      st.params = std::move(init.params);
      skipped += init.skipped_updates;
      if (cfg.reinit_direction_head) {
        Rng rng = derive_rng(cfg.seed, "reinit", {});
        st.params.reinitialize("dir_w", rng, cfg.init);
        st.params.reinitialize("dir_b", rng, cfg.init);
        st.params.touch();
      }
    }
    st.adam = AdamState::for_params(st.params.tensors);
  }

  std::vector<RewardSpec> specs;
  for (size_t i = 0; i < data.train.size(); ++i)
    specs.push_back(reward_spec_for(data.train[i], cfg, mask[i]));

  const auto started = std::chrono::steady_clock::now();
  const auto agent = policy_agent({&st.params}, Decode::Greedy);
  for (int e = st.epochs_done; e < cfg.epochs; ++e) {
    const auto order = detail::shuffled(data.train.size(), cfg.seed, "pg-order", e);
    for (size_t start = 0; start < order.size(); start += cfg.pg_batch) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.pg_batch));
      const long b = static_cast<long>(end - start);
      std::vector<ParamSet> parts(b);
#pragma omp parallel for schedule(dynamic)
      for (long k = 0; k < b; ++k) {
        const size_t i = order[start + k];
        Rng rng = derive_rng(cfg.seed, "rollout", {i, static_cast<std::uint64_t>(e)});
        const auto r = policy_rollout(st.params, data.train[i], data.geometry, specs[i],
                                      cfg.horizon, Decode::Sample, rng);
        parts[k] = rollout_gradient(st.params, r, credit, cfg.entropy_weight);
      }
      ParamSet grads;
      if (b == 1) {
        grads = std::move(parts[0]);
      } else {
        grads = st.params.tensors.zeros_like();
        detail::reduce_in_order(grads, parts);
        grads.scale(1.0 / static_cast<double>(b));
      }
      if (adam_step(st.params.tensors, grads, st.adam, cfg.lr_policy, cfg.clip_norm) ==
          AdamOutcome::SkippedNonFinite)
        ++skipped;
      st.params.touch();
    }
    detail::finish_epoch(st, *agent, data, cfg, e, started, hooks);
  }
  auto out = detail::result_of(st, cfg);
  out.skipped_updates = skipped;
  return out;
}

}  // namespace

TrainResult train_cb_policy_gradient(const Dataset& data, const LearnConfig& cfg,
                                     const TrainHooks& hooks) {
  return train_policy_gradient(data, cfg, hooks, CreditAssignment::Immediate);
}

TrainResult train_reinforce(const Dataset& data, const LearnConfig& cfg, const TrainHooks& hooks) {
  return train_policy_gradient(data, cfg, hooks, CreditAssignment::Total);
}

}  // namespace blocks
