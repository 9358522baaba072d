// blocksrl: data generation, training, evaluation and diagnostics.
#include <sys/file.h>
#include <unistd.h>
#include <fcntl.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "blocks/eval.hpp"
#include "blocks/experiment.hpp"
#include "blocks/learn.hpp"
#include "blocks/reward.hpp"
#include "blocks/shaping_check.hpp"

namespace fs = std::filesystem;
using namespace blocks;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCheck = 2;

struct CommonOptions {
  std::string config;
  std::string preset;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string algo;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_algo) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--preset", o.preset, "desk | full-scale");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s, o.seed_set = true; }, "random seed");
  if (with_algo)
    cmd->add_option("--algo", o.algo, "cbpg | supervised | reinforce | dqn | planner | stop | random");
  cmd->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    c = load_config(o.config);
    if (!o.preset.empty() && o.preset != c.preset)
      throw ConfigError("preset: --preset conflicts with the config file's preset");
  } else {
    c = preset_config(o.preset.empty() ? "desk" : o.preset);
    c.out_dir = fs::absolute(c.out_dir).lexically_normal().string();
  }
  if (o.seed_set) c.seed = o.seed;
  c.learn.seed = c.seed;
  if (!o.algo.empty()) {
    auto a = parse_algo(o.algo);
    if (!a) throw ConfigError("algo: unknown algorithm '" + o.algo + "'");
    c.algo = *a;
  }
  if (!o.out.empty()) c.out_dir = fs::absolute(o.out).lexically_normal().string();
  c.validate();
  return c;
}

// Advisory lock on the output directory, held for the life of the process.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) {
    fs::create_directories(dir);
    const auto path = (fs::path(dir) / ".lock").string();
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0 || ::flock(fd_, LOCK_EX | LOCK_NB) != 0)
      throw Error("output directory '" + dir + "' is in use by another command");
  }
  ~DirLock() {
    if (fd_ >= 0) ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

void write_file(const fs::path& p, const std::string& content) {
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << content;
  }
  fs::rename(tmp, p);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string metrics_text(const std::vector<MetricsRow>& log) {
  std::string s = metrics_header() + "\n";
  for (const auto& r : log) s += format_metrics_row(r) + "\n";
  return s;
}

const std::vector<TaskExample>& pick_split(const PreparedData& d, const std::string& split) {
  if (split == "train") return d.dataset.train;
  if (split == "validation") return d.dataset.monitor;
  if (split == "test") return d.test;
  throw ConfigError("split: expected train, validation or test");
}

void check_compatible(const PolicyParams& p, const PreparedData& d, const LearnConfig& cfg) {
  const auto& dims = p.dims;
  if (dims.num_blocks != d.dataset.geometry.num_blocks() ||
      dims.board_width != d.dataset.geometry.width ||
      dims.board_height != d.dataset.geometry.height || dims.history != cfg.history)
    throw ShapeError("checkpoint dimensions do not match the configured board and history");
}

// Re-tokenizes the data with the checkpoint's vocabulary.
void adopt_vocab(PreparedData& d, const Vocabulary& v) {
  d.dataset.vocab = v;
  tokenize_examples(d.dataset.train, v);
  tokenize_examples(d.dataset.monitor, v);
  tokenize_examples(d.test, v);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonOptions& o) {
  auto cfg = resolve_config(o);
  if (!cfg.synthetic) throw ConfigError("data.synthetic: gen-data needs a synthetic spec");
  DirLock lock(cfg.out_dir);
  const auto examples = generate_synthetic(*cfg.synthetic, cfg.geometry);
  const auto path = fs::path(cfg.out_dir) / "corpus.jsonl";
  write_file(path, format_corpus(examples, cfg.geometry));
  write_file(fs::path(cfg.out_dir) / "config.json", config_to_json(cfg) + "\n");
  const auto s = split_examples(examples, cfg.synthetic->seed);
  std::printf("wrote %zu examples to %s (train %zu, validation %zu, test %zu)\n", examples.size(),
              path.c_str(), s.train.size(), s.validation.size(), s.test.size());
  return kExitOk;
}

int cmd_train(const CommonOptions& o, const std::string& resume, bool record_time) {
  auto cfg = resolve_config(o);
  if (record_time) cfg.learn.record_time = true;
  if (cfg.algo == Algo::Stop || cfg.algo == Algo::Random)
    throw ConfigError("algo: " + std::string(algo_name(cfg.algo)) + " has nothing to train");
  DirLock lock(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  const auto data = prepare_data(cfg);
  const std::string config_json = config_to_json(cfg);
  write_file(out / "config.json", config_json + "\n");

  TrainState resumed;
  TrainHooks hooks;
  if (!resume.empty()) {
    resumed = deserialize_train_state(read_file(resume));
    hooks.resume = &resumed;
  }
  hooks.on_epoch = [&](const TrainState& st) {
    write_file(out / "metrics.csv", metrics_text(st.log));
    write_file(out / "state.bin", serialize_train_state(st));
    const auto& r = st.log.back();
    std::printf("epoch %d  completion %.3f  mean error %.3f\n", r.epoch, r.completion_rate,
                r.mean_error);
    std::fflush(stdout);
  };

  TrainResult result;
  switch (cfg.algo) {
    case Algo::CbPg: result = train_cb_policy_gradient(data.dataset, cfg.learn, hooks); break;
    case Algo::Reinforce: result = train_reinforce(data.dataset, cfg.learn, hooks); break;
    case Algo::Supervised: result = train_supervised(data.dataset, cfg.learn, hooks); break;
    case Algo::Dqn: result = train_dqn(data.dataset, cfg.learn, hooks); break;
    case Algo::Planner: result = train_planner_supervised(data.dataset, cfg.learn, hooks); break;
    default: break;
  }
  write_file(out / "metrics.csv", metrics_text(result.log));
  Checkpoint ck{config_json, result.params, data.dataset.vocab};
  write_file(out / "model.ckpt", serialize_checkpoint(ck));
  if (result.skipped_updates > 0)
    std::fprintf(stderr, "skipped %d updates with non-finite gradients\n", result.skipped_updates);
  std::printf("checkpoint written to %s\n", (out / "model.ckpt").c_str());
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& ensemble,
             const std::string& split, const std::string& mode) {
  auto cfg = resolve_config(o);
  auto data = prepare_data(cfg);
  std::vector<Checkpoint> models;
  std::vector<std::string> paths = split_list(ensemble);
  if (!checkpoint.empty()) paths.insert(paths.begin(), checkpoint);
  for (const auto& p : paths) models.push_back(load_checkpoint(p));
  if (!models.empty()) {
    adopt_vocab(data, models.front().vocab);
    for (const auto& m : models) {
      if (!(m.vocab == models.front().vocab))
        throw ShapeError("ensemble members were trained with different vocabularies");
      check_compatible(m.params, data, cfg.learn);
    }
  }
  if (mode != "greedy" && mode != "sample") throw ConfigError("mode: expected greedy or sample");
  const Decode decode = mode == "greedy" ? Decode::Greedy : Decode::Sample;

  std::unique_ptr<Agent> agent;
  std::vector<const PolicyParams*> members;
  for (const auto& m : models) members.push_back(&m.params);
  switch (cfg.algo) {
    case Algo::Stop: agent = stop_baseline(); break;
    case Algo::Random: agent = random_baseline(); break;
    default: {
      if (members.empty()) throw ConfigError("checkpoint: --checkpoint or --ensemble is required");
      const auto head = members.front()->dims.head;
      if (head == HeadKind::QValues) agent = q_agent(members.front());
      else if (head == HeadKind::Planner) agent = planner_agent(members.front());
      else agent = policy_agent(members, decode);
    }
  }
  EvalOptions opt;
  opt.horizon = cfg.learn.horizon;
  opt.history = cfg.learn.history;
  opt.seed = cfg.seed;
  const auto report = evaluate(*agent, pick_split(data, split), data.dataset.geometry, opt);

  DirLock lock(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  auto json = report_to_json(report);
  write_file(out / "report.json", json);
  write_file(out / "report.csv",
             aggregate_csv_header() + "\n" + aggregate_csv_row(report.aggregate) + "\n");
  write_file(out / "eval_config.json", config_to_json(cfg) + "\n");
  std::printf("%s\n%s\n", aggregate_csv_header().c_str(),
              aggregate_csv_row(report.aggregate).c_str());
  return kExitOk;
}

int cmd_shaping_check(std::uint64_t seed, int trials, const std::vector<std::string>& fixtures) {
  if (trials < 0) throw ConfigError("trials: must be >= 0");
  const auto ng = run_shaping_trials(trials, seed, ShapingMode::StatePotential);
  const auto lb = run_shaping_trials(trials, seed, ShapingMode::StateActionPotential);
  std::printf("state potential:        %d/%d preserved\n", ng.preserved, ng.trials);
  std::printf("look-back potential:    %d/%d preserved\n", lb.preserved, lb.trials);
  for (const auto& [i, rep] : ng.violations)
    std::printf("state potential trial %d: %s\n", i, format_order_report(rep).c_str());
  for (const auto& [i, rep] : lb.violations)
    std::printf("look-back trial %d: %s\n", i, format_order_report(rep).c_str());
  for (const auto& f : fixtures) {
    const auto fx = load_mdp_fixture(f);
    const auto rep = check_shaping_safety(fx.mdp, fx.term);
    std::printf("%s: %s\n", f.c_str(), format_order_report(rep).c_str());
  }
  return ng.preserved == ng.trials ? kExitOk : kExitCheck;
}

std::string snapshot_line(const WorldState& s, const BoardGeometry& g) {
  std::string out;
  for (int b = 0; b < s.num_blocks(); ++b) {
    if (!out.empty()) out += ' ';
    out += g.block_ids[b];
    if (s.present(b))
      out += "(" + std::to_string(s.cells[b]->col) + "," + std::to_string(s.cells[b]->row) + ")";
    else
      out += "(-)";
  }
  return out;
}

int cmd_rollout(const CommonOptions& o, const std::string& checkpoint, const std::string& id,
                const std::string& split, const std::string& mode) {
  auto cfg = resolve_config(o);
  auto data = prepare_data(cfg);
  std::optional<Checkpoint> ck;
  if (!checkpoint.empty()) {
    ck = load_checkpoint(checkpoint);
    adopt_vocab(data, ck->vocab);
    check_compatible(ck->params, data, cfg.learn);
    if (ck->params.dims.head != HeadKind::Factored)
      throw ConfigError("checkpoint: rollout dumps need a factored policy");
  }
  const auto& examples = pick_split(data, split);
  const TaskExample* ex = nullptr;
  for (const auto& e : examples)
    if (e.id == id) ex = &e;
  if (!ex) throw ConfigError("example: unknown id '" + id + "' in split " + split);
  const auto& g = data.dataset.geometry;
  const RewardSpec spec = reward_spec_for(*ex, cfg.learn, true);

  std::vector<std::pair<WorldState, Action>> steps;
  if (mode == "demo" || !ck) {
    steps = ex->demonstration->steps;
  } else {
    if (mode != "greedy" && mode != "sample") throw ConfigError("mode: expected greedy, sample or demo");
    Rng rng(cfg.seed);
    const auto r = policy_rollout(ck->params, *ex, g, spec, cfg.learn.horizon,
                                  mode == "greedy" ? Decode::Greedy : Decode::Sample, rng);
    WorldState s = ex->start;
    for (const auto& st : r.steps) {
      steps.emplace_back(s, st.action);
      s = apply(s, st.action, g).next_state;
    }
  }
  std::printf("# %s: %s\n", ex->id.c_str(), ex->instruction.raw.c_str());
  std::printf("# goal %s\n", snapshot_line(ex->goal, g).c_str());
  WorldState prev_state = ex->start;
  Action prev = Action::none();
  double total = 0.0;
  for (size_t j = 0; j < steps.size(); ++j) {
    const auto& [s, a] = steps[j];
    const auto step = apply(s, a, g);
    const auto r = reward_terms(spec, ShapingInputs{prev_state, prev, s, a, step});
    total += r.total();
    std::printf("%zu  %s  %-8s  problem %+.4f  f1 %+.4f  f2 %+.4f  total %+.4f\n", j,
                snapshot_line(s, g).c_str(), to_string(a, g).c_str(), r.problem, r.f1, r.f2,
                r.total());
    prev_state = s;
    prev = a;
  }
  std::printf("# sum of shaped rewards %+.6f\n", total);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-following agents in a blocks world"};
  app.require_subcommand(1);

  CommonOptions gen_o, train_o, eval_o, roll_o;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  add_common(gen, gen_o, false);

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, train_o, true);
  std::string resume;
  bool record_time = false;
  train->add_option("--resume", resume, "train state to continue from")->check(CLI::ExistingFile);
  train->add_flag("--record-time", record_time, "record wall-clock seconds in the metrics log");

  auto* eval = app.add_subcommand("eval", "evaluate a model or baseline");
  add_common(eval, eval_o, true);
  std::string checkpoint, ensemble, split = "test", mode = "greedy";
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--ensemble", ensemble, "comma-separated checkpoints to average");
  eval->add_option("--split", split, "train | validation | test");
  eval->add_option("--mode", mode, "greedy | sample");

  auto* shaping = app.add_subcommand("shaping-check", "brute-force reward shaping check");
  std::uint64_t shaping_seed = 1;
  int trials = 100;
  std::vector<std::string> fixtures;
  shaping->add_option("--seed", shaping_seed, "random seed");
  shaping->add_option("--trials", trials, "number of random MDPs");
  shaping->add_option("--fixture", fixtures, "MDP fixture files")->check(CLI::ExistingFile);

  auto* roll = app.add_subcommand("rollout", "print a step-by-step trajectory");
  add_common(roll, roll_o, false);
  std::string roll_ckpt, example, roll_split = "test", roll_mode = "greedy";
  roll->add_option("--checkpoint", roll_ckpt, "policy checkpoint (demonstration replay without)")
      ->check(CLI::ExistingFile);
  roll->add_option("--example", example, "example id")->required();
  roll->add_option("--split", roll_split, "train | validation | test");
  roll->add_option("--mode", roll_mode, "greedy | sample | demo");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_o);
    if (*train) return cmd_train(train_o, resume, record_time);
    if (*eval) return cmd_eval(eval_o, checkpoint, ensemble, split, mode);
    if (*shaping) return cmd_shaping_check(shaping_seed, trials, fixtures);
    if (*roll) return cmd_rollout(roll_o, roll_ckpt, example, roll_split, roll_mode);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
