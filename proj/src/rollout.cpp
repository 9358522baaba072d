#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "blocks/learn.hpp"
#include "blocks/rng.hpp"
#include "json.hpp"
#include "learn_internal.hpp"

namespace blocks {

void LearnConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw ConfigError(field + ": " + rule);
  };
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (horizon < 1) fail("horizon", "must be >= 1");
  if (!(entropy_weight >= 0.0)) fail("entropy_weight", "must be >= 0");
  if (!(lr_supervised >= 0.0)) fail("lr_supervised", "must be >= 0");
  if (!(lr_policy >= 0.0)) fail("lr_policy", "must be >= 0");
  if (!(lr_dqn >= 0.0)) fail("lr_dqn", "must be >= 0");
  if (!(clip_norm >= 0.0)) fail("clip_norm", "must be >= 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (history < 0) fail("history", "must be >= 0");
  if (!(demo_fraction >= 0.0 && demo_fraction <= 1.0)) fail("demo_fraction", "must be in [0, 1]");
  if (supervised_init_epochs < 0) fail("supervised_init_epochs", "must be >= 0");
  if (pg_batch < 1) fail("pg_batch", "must be >= 1");
  if (!(delta >= 0.0) || !(delta_f >= 0.0) || !(eta > 0.0))
    fail("delta/delta_f/eta", "delta and delta_f must be >= 0, eta > 0");
  if (enable_f2 && demo_fraction == 0.0)
    fail("enable_f2", "demonstration shaping needs demo_fraction > 0");
  if (replay_capacity < batch_size) fail("replay_capacity", "must be >= batch_size");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma", "must be in [0, 1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
    fail("epsilon", "must be in [0, 1]");
  if (epsilon_decay_steps < 1) fail("epsilon_decay_steps", "must be >= 1");
  if (!(priority_exponent >= 0.0)) fail("priority_exponent", "must be >= 0");
  if (dqn_update_every < 1) fail("dqn_update_every", "must be >= 1");
}

std::string metrics_header() {
  return "epoch,mean_error,median_error,mean_min_distance,completion_rate,mean_steps,"
         "mean_entropy,wall_seconds";
}

std::string format_metrics_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f", r.epoch, r.mean_error,
                r.median_error, r.mean_min_distance, r.completion_rate, r.mean_steps,
                r.mean_entropy, r.wall_seconds);
  return buf;
}

double Rollout::total_reward() const {
  double t = 0.0;
  for (const auto& s : steps) t += s.reward.total();
  return t;
}

RewardSpec reward_spec_for(const TaskExample& ex, const LearnConfig& cfg, bool with_demo) {
  RewardSpec r;
  r.goal = ex.goal;
  r.delta = cfg.delta;
  r.delta_f = cfg.delta_f;
  r.eta = cfg.eta;
  r.enable_f1 = cfg.enable_f1;
  r.distance_reward = cfg.distance_reward;
  if (with_demo && ex.demonstration) {
    r.demonstration = ex.demonstration;
    r.enable_f2 = cfg.enable_f2;
  }
  return r;
}

Rollout policy_rollout(const PolicyParams& p, const TaskExample& ex, const BoardGeometry& g,
                       const RewardSpec& reward, int horizon, Decode mode, Rng& rng) {
  Rollout r;
  ContextBuilder cb(ex.instruction, g, p.dims.history);
  cb.reset(ex.start);
  const auto ins = encode_instruction(p, ex.instruction);
  WorldState state = ex.start;
  WorldState prev_state = ex.start;
  Action prev = Action::none();
  for (int j = 0; j < horizon; ++j) {
    StepRecord rec;
    rec.context = cb.context();
    auto out = action_distribution(p, rec.context, ins);
    rec.action = mode == Decode::Greedy ? greedy(out.dist) : sample(out.dist, rng);
    std::tie(rec.log_prob, rec.entropy) = log_prob_and_entropy(out.dist, rec.action);
    StepResult step = apply(state, rec.action, g);
    rec.failed = step.failed;
    rec.reward = reward_terms(reward, ShapingInputs{prev_state, prev, state, rec.action, step});
    rec.trace = std::move(out.trace);
    const Action a = rec.action;
    r.steps.push_back(std::move(rec));
    if (a.is_stop()) {
      r.reason = TerminalReason::Stop;
      break;
    }
    prev_state = state;
    prev = a;
    state = std::move(step.next_state);
    cb.advance(a, state);
  }
  r.final_state = state;
  return r;
}

ParamSet rollout_gradient(const PolicyParams& p, const Rollout& r, CreditAssignment credit,
                          double entropy_weight) {
  ParamSet grads = p.tensors.zeros_like();
  if (r.steps.empty()) return grads;
  std::vector<double> dmean(p.dims.lstm_hidden, 0.0);
  const double n = static_cast<double>(r.steps.size());
  const double total = r.total_reward();
  for (const auto& s : r.steps) {
    const double w = credit == CreditAssignment::Immediate ? s.reward.total() : total;
    accumulate_policy_gradient(p, s.trace, s.action, w / n, entropy_weight / n, grads, &dmean);
  }
  backward_instruction(p, *r.steps.front().trace.instruction, dmean, grads);
  return grads;
}

std::vector<bool> demo_mask(size_t n, double rho, std::uint64_t seed) {
  std::vector<bool> mask(n, false);
  const auto keep = static_cast<size_t>(std::llround(rho * static_cast<double>(n)));
  const auto order = detail::shuffled(n, seed, "demo-mask", 0);
  for (size_t i = 0; i < keep && i < n; ++i) mask[order[i]] = true;
  return mask;
}

PolicyParams make_policy(const Dataset& data, const LearnConfig& cfg, HeadKind head) {
  PolicyDims d = cfg.dims;
  d.vocab_size = data.vocab.size();
  d.num_blocks = data.geometry.num_blocks();
  d.board_height = data.geometry.height;
  d.board_width = data.geometry.width;
  d.history = cfg.history;
  d.head = head;
  auto p = PolicyParams::create(d);
  Rng rng = derive_rng(cfg.seed, "init", {static_cast<std::uint64_t>(head)});
  p.initialize(rng, cfg.init);
  return p;
}

AgentContext demonstration_context(const TaskExample& ex, int step, const BoardGeometry& g,
                                   int history) {
  if (!ex.demonstration) throw ConfigError("example '" + ex.id + "' has no demonstration");
  const auto& steps = ex.demonstration->steps;
  AgentContext ctx;
  ctx.instruction = &ex.instruction;
  for (int s = 0; s <= history; ++s) {
    const int idx = step - history + s;
    ctx.observations.push_back(idx < 0 ? Observation::zeros(g.num_blocks(), g.height, g.width)
                                       : render(steps.at(idx).first, g));
  }
  ctx.prev_action = step > 0 ? steps.at(step - 1).second : Action::none();
  return ctx;
}

AgentContext start_context(const TaskExample& ex, const BoardGeometry& g, int history) {
  AgentContext ctx;
  ctx.instruction = &ex.instruction;
  ctx.observations.assign(history, Observation::zeros(g.num_blocks(), g.height, g.width));
  ctx.observations.push_back(render(ex.start, g));
  return ctx;
}

AgentContext window_context(const Instruction& ins, const std::vector<std::optional<WorldState>>& w,
                            const Action& prev, const BoardGeometry& g) {
  AgentContext ctx;
  ctx.instruction = &ins;
  for (const auto& s : w)
    ctx.observations.push_back(s ? render(*s, g)
                                 : Observation::zeros(g.num_blocks(), g.height, g.width));
  ctx.prev_action = prev;
  return ctx;
}

// ---------------------------------------------------------------------------
// Train state archive: a JSON header followed by embedded checkpoints.

namespace {

constexpr char kStateMagic[8] = {'B', 'L', 'K', 'S', 'T', 'A', 'T', 'E'};

void put_blob(std::string& out, const std::string& blob) {
  const std::uint64_t n = blob.size();
  out.append(reinterpret_cast<const char*>(&n), sizeof(n));
  out += blob;
}

std::string get_blob(const std::string& in, size_t& pos) {
  std::uint64_t n = 0;
  if (pos + sizeof(n) > in.size()) throw ShapeError("train state is truncated");
  std::memcpy(&n, in.data() + pos, sizeof(n));
  pos += sizeof(n);
  if (n > in.size() - pos) throw ShapeError("train state is truncated");
  std::string s = in.substr(pos, n);
  pos += n;
  return s;
}

std::string params_blob(const PolicyDims& dims, const ParamSet& t, std::uint64_t generation) {
  Checkpoint ck;
  ck.params.dims = dims;
  ck.params.tensors = t;
  ck.params.generation = generation;
  return serialize_checkpoint(ck);
}

}  // namespace

std::string serialize_train_state(const TrainState& s) {
  nlohmann::ordered_json h;
  h["epochs_done"] = s.epochs_done;
  h["best_completion"] = s.best_completion;
  h["best_error"] = s.best_error;
  h["best_epoch"] = s.best_epoch;
  h["global_step"] = s.global_step;
  h["adam"] = {{"step", s.adam.step},
               {"beta1", s.adam.beta1},
               {"beta2", s.adam.beta2},
               {"epsilon", s.adam.epsilon}};
  auto log = nlohmann::ordered_json::array();
  for (const auto& r : s.log)
    log.push_back({r.epoch, r.mean_error, r.median_error, r.mean_min_distance, r.completion_rate,
                   r.mean_steps, r.mean_entropy, r.wall_seconds});
  h["log"] = log;

  std::string out(kStateMagic, sizeof(kStateMagic));
  put_blob(out, h.dump());
  put_blob(out, params_blob(s.params.dims, s.params.tensors, s.params.generation));
  put_blob(out, params_blob(s.best.dims, s.best.tensors, s.best.generation));
  put_blob(out, params_blob(s.params.dims, s.adam.m, 0));
  put_blob(out, params_blob(s.params.dims, s.adam.v, 0));
  return out;
}

TrainState deserialize_train_state(const std::string& bytes) {
  if (bytes.size() < sizeof(kStateMagic) ||
      std::memcmp(bytes.data(), kStateMagic, sizeof(kStateMagic)) != 0)
    throw ShapeError("not a train state file");
  size_t pos = sizeof(kStateMagic);
  TrainState s;
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(get_blob(bytes, pos));
    s.epochs_done = h.at("epochs_done").get<int>();
    s.best_completion = h.at("best_completion").get<double>();
    s.best_error = h.at("best_error").get<double>();
    s.best_epoch = h.at("best_epoch").get<int>();
    s.global_step = h.at("global_step").get<std::uint64_t>();
    s.adam.step = h.at("adam").at("step").get<std::uint64_t>();
    s.adam.beta1 = h.at("adam").at("beta1").get<double>();
    s.adam.beta2 = h.at("adam").at("beta2").get<double>();
    s.adam.epsilon = h.at("adam").at("epsilon").get<double>();
    for (const auto& r : h.at("log")) {
      MetricsRow m;
      m.epoch = r.at(0).get<int>();
      m.mean_error = r.at(1).get<double>();
      m.median_error = r.at(2).get<double>();
      m.mean_min_distance = r.at(3).get<double>();
      m.completion_rate = r.at(4).get<double>();
      m.mean_steps = r.at(5).get<double>();
      m.mean_entropy = r.at(6).get<double>();
      m.wall_seconds = r.at(7).get<double>();
      s.log.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("train state header: ") + e.what());
  }
  s.params = deserialize_checkpoint(get_blob(bytes, pos)).params;
  s.best = deserialize_checkpoint(get_blob(bytes, pos)).params;
  s.adam.m = deserialize_checkpoint(get_blob(bytes, pos)).params.tensors;
  s.adam.v = deserialize_checkpoint(get_blob(bytes, pos)).params.tensors;
  if (pos != bytes.size()) throw ShapeError("trailing bytes after train state");
  return s;
}

// ---------------------------------------------------------------------------

namespace detail {

void check_dataset(const Dataset& data) {
  data.geometry.validate();
  if (data.train.empty()) throw ConfigError("train: dataset is empty");
}

const std::vector<TaskExample>& monitor_set(const Dataset& data) {
  return data.monitor.empty() ? data.train : data.monitor;
}

std::vector<size_t> shuffled(size_t n, std::uint64_t seed, const char* tag, std::uint64_t epoch) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng = derive_rng(seed, tag, {epoch});
  // Fisher-Yates with an explicit draw so the permutation is the same across
  // standard library implementations.
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void finish_epoch(TrainState& st, const Agent& agent, const Dataset& data, const LearnConfig& cfg,
                  int epoch, std::chrono::steady_clock::time_point started,
                  const TrainHooks& hooks) {
  EvalOptions opt;
  opt.horizon = cfg.horizon;
  opt.history = cfg.history;
  opt.seed = cfg.seed;
  const auto rep = evaluate(agent, monitor_set(data), data.geometry, opt);
  MetricsRow row;
  row.epoch = epoch;
  row.mean_error = rep.aggregate.mean_error;
  row.median_error = rep.aggregate.median_error;
  row.mean_min_distance = rep.aggregate.mean_min_distance;
  row.completion_rate = rep.aggregate.completion_rate;
  row.mean_steps = rep.aggregate.mean_steps;
  row.mean_entropy = rep.aggregate.mean_entropy;
  if (cfg.record_time)
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  st.log.push_back(row);

  const bool better = st.best_epoch < 0 || row.completion_rate > st.best_completion ||
                      (row.completion_rate == st.best_completion && row.mean_error < st.best_error);
  if (better) {
    st.best = st.params;
    st.best_completion = row.completion_rate;
    st.best_error = row.mean_error;
    st.best_epoch = epoch;
  }
  st.epochs_done = epoch + 1;
  if (hooks.on_epoch) hooks.on_epoch(st);
}

TrainResult result_of(const TrainState& st, const LearnConfig& cfg) {
  TrainResult r;
  r.params = cfg.select_best && st.best_epoch >= 0 ? st.best : st.params;
  r.log = st.log;
  return r;
}

void reduce_in_order(ParamSet& total, const std::vector<ParamSet>& parts) {
  for (const auto& p : parts) total.add_scaled(p, 1.0);
}

}  // namespace detail

}  // namespace blocks
