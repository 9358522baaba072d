#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "blocks/learn.hpp"
#include "blocks/rng.hpp"
#include "learn_internal.hpp"

namespace blocks {

PlannerTarget planner_target(const TaskExample& ex) {
  PlannerTarget t;
  t.block = ex.moved_block();
  const Cell c = *ex.goal.cells.at(t.block);
  t.col = c.col;
  t.row = c.row;
  return t;
}

double planner_loss(const PolicyParams& p, const AgentContext& ctx, const PlannerTarget& t) {
  const auto tr = forward(p, ctx);
  const auto probs = softmax(tr.out_b);
  const double dc = tr.out_a[0] - t.col;
  const double dr = tr.out_a[1] - t.row;
  return -std::log(probs.at(t.block)) + dc * dc + dr * dr;
}

double accumulate_planner_gradient(const PolicyParams& p, const AgentContext& ctx,
                                   const PlannerTarget& t, ParamSet& grads) {
  if (p.dims.head != HeadKind::Planner) throw ShapeError("not a planner");
  const auto tr = forward(p, ctx);
  const auto probs = softmax(tr.out_b);
  std::vector<double> d_block(probs.size());
  for (size_t k = 0; k < probs.size(); ++k)
    d_block[k] = (static_cast<int>(k) == t.block ? 1.0 : 0.0) - probs[k];
  const double dc = tr.out_a[0] - t.col;
  const double dr = tr.out_a[1] - t.row;
  backward_outputs(p, tr, {-2.0 * dc, -2.0 * dr}, d_block, grads);
  return -std::log(probs[t.block]) + dc * dc + dr * dr;
}

WorldState planner_goal(const PolicyParams& p, const AgentContext& ctx, const WorldState& start,
                        const BoardGeometry& g) {
  const auto tr = forward(p, ctx);
  const auto probs = softmax(tr.out_b);
  int block = -1;
  for (int b = 0; b < static_cast<int>(probs.size()); ++b)
    if (start.present(b) && (block < 0 || probs[b] > probs[block])) block = b;
  if (block < 0) return start;
  const double pc = tr.out_a[0], pr = tr.out_a[1];
  Cell best = *start.cells[block];
  double best_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const int occ = start.occupant({c, r});
      if (occ >= 0 && occ != block) continue;
      const double d = (c - pc) * (c - pc) + (r - pr) * (r - pr);
      if (d < best_d) {
        best_d = d;
        best = {c, r};
      }
    }
  }
  WorldState goal = start;
  goal.cells[block] = best;
  return goal;
}

TrainResult train_planner_supervised(const Dataset& data, const LearnConfig& cfg,
                                     const TrainHooks& hooks) {
  cfg.validate();
  detail::check_dataset(data);
  std::vector<PlannerTarget> targets;
  for (const auto& ex : data.train) targets.push_back(planner_target(ex));

  TrainState st;
  if (hooks.resume) {
    st = *hooks.resume;
  } else {
    st.params = make_policy(data, cfg, HeadKind::Planner);
    st.adam = AdamState::for_params(st.params.tensors);
  }
  TrainResult r;
  const auto started = std::chrono::steady_clock::now();
  const auto agent = planner_agent(&st.params);
  for (int e = st.epochs_done; e < cfg.epochs; ++e) {
    const auto order = detail::shuffled(data.train.size(), cfg.seed, "planner", e);
    double loss = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const long b = static_cast<long>(end - start);
      std::vector<ParamSet> parts(b);
      std::vector<double> losses(b);
#pragma omp parallel for schedule(dynamic)
      for (long k = 0; k < b; ++k) {
        const size_t i = order[start + k];
        const auto ctx = start_context(data.train[i], data.geometry, cfg.history);
        parts[k] = st.params.tensors.zeros_like();
        losses[k] = accumulate_planner_gradient(st.params, ctx, targets[i], parts[k]);
      }
      ParamSet grads = st.params.tensors.zeros_like();
      detail::reduce_in_order(grads, parts);
      grads.scale(1.0 / static_cast<double>(b));
      for (double l : losses) loss += l;
      if (adam_step(st.params.tensors, grads, st.adam, cfg.lr_supervised, cfg.clip_norm) ==
          AdamOutcome::SkippedNonFinite)
        ++r.skipped_updates;
      st.params.touch();
    }
    r.losses.push_back(loss / static_cast<double>(order.size()));
    detail::finish_epoch(st, *agent, data, cfg, e, started, hooks);
  }
  auto out = detail::result_of(st, cfg);
  out.losses = std::move(r.losses);
  out.skipped_updates = r.skipped_updates;
  return out;
}

}  // namespace blocks
