#include <chrono>
#include <cmath>

#include "blocks/learn.hpp"
#include "blocks/rng.hpp"
#include "learn_internal.hpp"

namespace blocks {

namespace {

struct DemoStep {
  size_t example;
  int step;
};

std::vector<DemoStep> demo_steps(const Dataset& data, const std::vector<bool>& mask) {
  std::vector<DemoStep> out;
  for (size_t i = 0; i < data.train.size(); ++i) {
    if (!mask[i] || !data.train[i].demonstration) continue;
    for (int j = 0; j < data.train[i].demonstration->length(); ++j) out.push_back({i, j});
  }
  if (out.empty()) throw ConfigError("demo_fraction: no demonstrations available for supervised training");
  return out;
}

// One epoch of minibatch updates; returns the mean negative log-likelihood
// seen before each batch's update.
double supervised_epoch(PolicyParams& p, AdamState& adam, const Dataset& data,
                        const LearnConfig& cfg, const std::vector<DemoStep>& items, int epoch,
                        int& skipped) {
  const auto order = detail::shuffled(items.size(), cfg.seed, "supervised", epoch);
  double nll = 0.0;
  for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
    const long b = static_cast<long>(end - start);
    std::vector<ParamSet> parts(b);
    std::vector<double> lps(b, 0.0);
    const double w = 1.0 / static_cast<double>(b);
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < b; ++k) {
      const auto& it = items[order[start + k]];
      const auto& ex = data.train[it.example];
      const auto ctx = demonstration_context(ex, it.step, data.geometry, cfg.history);
      const auto out = action_distribution(p, ctx);
      const Action& a = ex.demonstration->steps[it.step].second;
      lps[k] = log_prob_and_entropy(out.dist, a).first;
      parts[k] = p.tensors.zeros_like();
      accumulate_policy_gradient(p, out.trace, a, w, 0.0, parts[k]);
    }
    ParamSet grads = p.tensors.zeros_like();
    detail::reduce_in_order(grads, parts);
    for (double lp : lps) nll -= lp;
    if (adam_step(p.tensors, grads, adam, cfg.lr_supervised, cfg.clip_norm) ==
        AdamOutcome::SkippedNonFinite)
      ++skipped;
    p.touch();
  }
  return nll / static_cast<double>(items.size());
}

}  // namespace

double supervised_objective(const PolicyParams& p, const Dataset& data, const LearnConfig& cfg,
                            const std::vector<bool>& mask) {
  const auto items = demo_steps(data, mask);
  const long n = static_cast<long>(items.size());
  std::vector<double> lps(n);
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    const auto& ex = data.train[items[k].example];
    const auto ctx = demonstration_context(ex, items[k].step, data.geometry, cfg.history);
    lps[k] = log_prob_and_entropy(action_distribution(p, ctx).dist,
                                  ex.demonstration->steps[items[k].step].second)
                 .first;
  }
  double total = 0.0;
  for (double lp : lps) total += lp;
  return total / static_cast<double>(n);
}

TrainResult train_supervised_from(PolicyParams init, const Dataset& data, const LearnConfig& cfg,
                                  int epochs, const std::vector<bool>& mask,
                                  bool monitor_each_epoch) {
  const auto items = demo_steps(data, mask);
  TrainState st;
  st.params = std::move(init);
  st.adam = AdamState::for_params(st.params.tensors);
  TrainResult r;
  const auto started = std::chrono::steady_clock::now();
  const auto agent = policy_agent({&st.params}, Decode::Greedy);
  for (int e = 0; e < epochs; ++e) {
    r.losses.push_back(
        supervised_epoch(st.params, st.adam, data, cfg, items, e, r.skipped_updates));
    if (monitor_each_epoch) detail::finish_epoch(st, *agent, data, cfg, e, started, {});
  }
  auto out = monitor_each_epoch ? detail::result_of(st, cfg) : TrainResult{};
  if (!monitor_each_epoch) out.params = st.params;
  out.losses = std::move(r.losses);
  out.skipped_updates = r.skipped_updates;
  return out;
}

TrainResult train_supervised(const Dataset& data, const LearnConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  detail::check_dataset(data);
  const auto mask = demo_mask(data.train.size(), cfg.demo_fraction, cfg.seed);
  const auto items = demo_steps(data, mask);

  TrainState st;
  if (hooks.resume) {
    st = *hooks.resume;
  } else {
    st.params = make_policy(data, cfg, HeadKind::Factored);
    st.adam = AdamState::for_params(st.params.tensors);
  }
  TrainResult r;
  const auto started = std::chrono::steady_clock::now();
  const auto agent = policy_agent({&st.params}, Decode::Greedy);
  for (int e = st.epochs_done; e < cfg.epochs; ++e) {
    r.losses.push_back(
        supervised_epoch(st.params, st.adam, data, cfg, items, e, r.skipped_updates));
    detail::finish_epoch(st, *agent, data, cfg, e, started, hooks);
  }
  auto out = detail::result_of(st, cfg);
  out.losses = std::move(r.losses);
  out.skipped_updates = r.skipped_updates;
  return out;
}

}  // namespace blocks
