#include "blocks/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "learn_internal.hpp"

namespace blocks {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError(where + "." + k + ": unknown field");
}

template <typename T>
void read(const json& obj, const std::string& key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

const char* template_name(TemplateSet t) {
  return t == TemplateSet::Basic ? "basic" : "paraphrase";
}

const char* init_name(InitScheme s) { return s == InitScheme::Glorot ? "glorot" : "truncated-normal"; }

}  // namespace

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::CbPg: return "cbpg";
    case Algo::Supervised: return "supervised";
    case Algo::Reinforce: return "reinforce";
    case Algo::Dqn: return "dqn";
    case Algo::Planner: return "planner";
    case Algo::Stop: return "stop";
    case Algo::Random: return "random";
  }
  return "cbpg";
}

std::optional<Algo> parse_algo(const std::string& s) {
  for (Algo a : {Algo::CbPg, Algo::Supervised, Algo::Reinforce, Algo::Dqn, Algo::Planner,
                 Algo::Stop, Algo::Random})
    if (s == algo_name(a)) return a;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  try {
    geometry.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
  if (corpus.has_value() == synthetic.has_value())
    throw ConfigError("data: exactly one of corpus and synthetic must be given");
  if (synthetic && synthetic->count <= 0) throw ConfigError("data.synthetic.count: must be > 0");
  if (out_dir.empty()) throw ConfigError("out: must not be empty");
  learn.validate();
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "desk") {
    c.geometry.width = 5;
    c.geometry.height = 5;
    c.geometry.block_ids = {"red", "green", "blue"};
    c.geometry.step_fraction = 1.0 / 5.0;
    SyntheticSpec s;
    s.count = 286;  // 200 / 28 / 58 after the split
    s.templates = TemplateSet::Paraphrase;
    s.max_displacement = 3;
    s.min_moves = 2;
    c.synthetic = s;
    auto& l = c.learn;
    l.epochs = 50;
    l.lr_policy = 0.001;
    l.supervised_init_epochs = 20;
    l.dims.embed_dim = 16;
    l.dims.lstm_hidden = 32;
    l.dims.conv = {ConvLayerSpec{8, 3, 1, 1}};
    l.dims.visual_dim = 32;
    l.dims.block_embed = 8;
    l.dims.dir_embed = 8;
    l.dims.hidden = 64;
    l.init = InitScheme::Glorot;
    return c;
  }
  if (name == "full-scale") {
    std::vector<std::string> ids;
    for (int i = 1; i <= 20; ++i) ids.push_back(std::to_string(i));
    c.geometry = BoardGeometry::from_step_fraction(0.04, ids);
    SyntheticSpec s;
    s.count = 16767;
    c.synthetic = s;
    auto& l = c.learn;
    l.epochs = 10;
    l.horizon = 40;
    l.entropy_weight = 0.1;
    l.lr_supervised = 0.001;
    l.lr_policy = 0.00025;
    l.clip_norm = 5.0;
    l.batch_size = 32;
    l.history = 4;
    l.delta = 0.02;
    l.delta_f = 0.02;
    l.supervised_init_epochs = 2;
    l.dims.embed_dim = 150;
    l.dims.lstm_hidden = 250;
    // 25x25 board: 6x6, then 2x2, then 1x1 feature maps
    l.dims.conv = {ConvLayerSpec{32, 8, 4, 2}, ConvLayerSpec{32, 8, 4, 4},
                   ConvLayerSpec{32, 4, 2, 1}};
    l.dims.visual_dim = 200;
    l.dims.block_embed = 32;
    l.dims.dir_embed = 24;
    l.dims.hidden = 120;
    l.init = InitScheme::TruncatedNormal;
    return c;
  }
  throw ConfigError("preset: unknown preset '" + name + "'");
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(j, "config", {"preset", "seed", "algo", "out", "geometry", "data", "learn", "model"});
  std::string preset = "desk";
  read(j, "preset", "config", preset);
  ExperimentConfig c = preset_config(preset);
  read(j, "seed", "config", c.seed);
  read(j, "out", "config", c.out_dir);
  if (j.contains("algo")) {
    std::string a;
    read(j, "algo", "config", a);
    auto parsed = parse_algo(a);
    if (!parsed) throw ConfigError("config.algo: unknown algorithm '" + a + "'");
    c.algo = *parsed;
  }
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    check_keys(g, "geometry", {"width", "height", "blocks", "step_fraction"});
    if (g.contains("step_fraction") && !g.contains("width")) {
      double f = 0;
      read(g, "step_fraction", "geometry", f);
      auto ids = c.geometry.block_ids;
      read(g, "blocks", "geometry", ids);
      c.geometry = BoardGeometry::from_step_fraction(f, ids);
    } else {
      read(g, "width", "geometry", c.geometry.width);
      read(g, "height", "geometry", c.geometry.height);
      read(g, "blocks", "geometry", c.geometry.block_ids);
      c.geometry.step_fraction = 1.0 / c.geometry.width;
    }
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, "data", {"corpus", "validation", "test", "synthetic"});
    if (d.contains("corpus")) {
      std::string p;
      read(d, "corpus", "data", p);
      c.corpus = resolve(p, base_dir);
      c.synthetic.reset();
    }
    for (const char* key : {"validation", "test"}) {
      if (!d.contains(key)) continue;
      std::string p;
      read(d, key, "data", p);
      (std::string(key) == "test" ? c.test_corpus : c.validation_corpus) = resolve(p, base_dir);
    }
    if (d.contains("synthetic")) {
      const auto& s = d["synthetic"];
      check_keys(s, "data.synthetic",
                 {"seed", "count", "templates", "placement_fraction", "max_displacement",
                  "min_moves", "present_blocks", "resample_budget"});
      SyntheticSpec spec = c.synthetic.value_or(SyntheticSpec{});
      read(s, "seed", "data.synthetic", spec.seed);
      read(s, "count", "data.synthetic", spec.count);
      read(s, "placement_fraction", "data.synthetic", spec.placement_fraction);
      read(s, "max_displacement", "data.synthetic", spec.max_displacement);
      read(s, "min_moves", "data.synthetic", spec.min_moves);
      read(s, "present_blocks", "data.synthetic", spec.present_blocks);
      read(s, "resample_budget", "data.synthetic", spec.resample_budget);
      if (s.contains("templates")) {
        std::string t;
        read(s, "templates", "data.synthetic", t);
        if (t == "basic") spec.templates = TemplateSet::Basic;
        else if (t == "paraphrase") spec.templates = TemplateSet::Paraphrase;
        else throw ConfigError("data.synthetic.templates: expected basic or paraphrase");
      }
      c.synthetic = spec;
      if (d.contains("corpus")) throw ConfigError("data: exactly one of corpus and synthetic must be given");
    }
  }
  if (j.contains("learn")) {
    const auto& l = j["learn"];
    auto& o = c.learn;
    check_keys(l, "learn",
               {"epochs", "horizon", "entropy_weight", "lr_supervised", "lr_policy", "clip_norm",
                "batch_size", "history", "enable_f1", "enable_f2", "distance_reward", "delta",
                "delta_f", "eta", "supervised_init", "supervised_init_epochs",
                "reinit_direction_head", "demo_fraction", "pg_batch", "replay_capacity",
                "epsilon_start", "epsilon_end", "epsilon_decay_steps", "gamma",
                "priority_exponent", "dqn_update_every", "lr_dqn", "select_best", "record_time"});
    read(l, "epochs", "learn", o.epochs);
    read(l, "horizon", "learn", o.horizon);
    read(l, "entropy_weight", "learn", o.entropy_weight);
    read(l, "lr_supervised", "learn", o.lr_supervised);
    read(l, "lr_policy", "learn", o.lr_policy);
    read(l, "clip_norm", "learn", o.clip_norm);
    read(l, "batch_size", "learn", o.batch_size);
    read(l, "history", "learn", o.history);
    read(l, "enable_f1", "learn", o.enable_f1);
    read(l, "enable_f2", "learn", o.enable_f2);
    read(l, "distance_reward", "learn", o.distance_reward);
    read(l, "delta", "learn", o.delta);
    read(l, "delta_f", "learn", o.delta_f);
    read(l, "eta", "learn", o.eta);
    read(l, "supervised_init", "learn", o.supervised_init);
    read(l, "supervised_init_epochs", "learn", o.supervised_init_epochs);
    read(l, "reinit_direction_head", "learn", o.reinit_direction_head);
    read(l, "demo_fraction", "learn", o.demo_fraction);
    read(l, "pg_batch", "learn", o.pg_batch);
    read(l, "replay_capacity", "learn", o.replay_capacity);
    read(l, "epsilon_start", "learn", o.epsilon_start);
    read(l, "epsilon_end", "learn", o.epsilon_end);
    read(l, "epsilon_decay_steps", "learn", o.epsilon_decay_steps);
    read(l, "gamma", "learn", o.gamma);
    read(l, "priority_exponent", "learn", o.priority_exponent);
    read(l, "dqn_update_every", "learn", o.dqn_update_every);
    read(l, "lr_dqn", "learn", o.lr_dqn);
    read(l, "select_best", "learn", o.select_best);
    read(l, "record_time", "learn", o.record_time);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    auto& d = c.learn.dims;
    check_keys(m, "model", {"embed_dim", "lstm_hidden", "conv", "visual_dim", "block_embed",
                            "dir_embed", "hidden", "init"});
    read(m, "embed_dim", "model", d.embed_dim);
    read(m, "lstm_hidden", "model", d.lstm_hidden);
    read(m, "visual_dim", "model", d.visual_dim);
    read(m, "block_embed", "model", d.block_embed);
    read(m, "dir_embed", "model", d.dir_embed);
    read(m, "hidden", "model", d.hidden);
    if (m.contains("conv")) {
      if (!m["conv"].is_array()) throw ConfigError("model.conv: expected an array");
      d.conv.clear();
      for (const auto& layer : m["conv"]) {
        check_keys(layer, "model.conv[]", {"filters", "kernel", "stride", "pad"});
        ConvLayerSpec s;
        read(layer, "filters", "model.conv[]", s.filters);
        read(layer, "kernel", "model.conv[]", s.kernel);
        read(layer, "stride", "model.conv[]", s.stride);
        read(layer, "pad", "model.conv[]", s.pad);
        d.conv.push_back(s);
      }
    }
    if (m.contains("init")) {
      std::string s;
      read(m, "init", "model", s);
      if (s == "glorot") c.learn.init = InitScheme::Glorot;
      else if (s == "truncated-normal") c.learn.init = InitScheme::TruncatedNormal;
      else throw ConfigError("model.init: expected truncated-normal or glorot");
    }
  }
  c.out_dir = resolve(c.out_dir, base_dir);
  c.learn.seed = c.seed;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse_config(buf.str(), base.empty() ? "." : base);
}

std::string config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["algo"] = algo_name(c.algo);
  j["out"] = c.out_dir;
  j["geometry"] = {{"width", c.geometry.width},
                   {"height", c.geometry.height},
                   {"blocks", c.geometry.block_ids}};
  ojson d = ojson::object();
  if (c.corpus) d["corpus"] = *c.corpus;
  if (c.validation_corpus) d["validation"] = *c.validation_corpus;
  if (c.test_corpus) d["test"] = *c.test_corpus;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    d["synthetic"] = {{"seed", s.seed},
                      {"count", s.count},
                      {"templates", template_name(s.templates)},
                      {"placement_fraction", s.placement_fraction},
                      {"max_displacement", s.max_displacement},
                      {"min_moves", s.min_moves},
                      {"present_blocks", s.present_blocks},
                      {"resample_budget", s.resample_budget}};
  }
  j["data"] = d;
  const auto& l = c.learn;
  j["learn"] = {{"epochs", l.epochs},
                {"horizon", l.horizon},
                {"entropy_weight", l.entropy_weight},
                {"lr_supervised", l.lr_supervised},
                {"lr_policy", l.lr_policy},
                {"clip_norm", l.clip_norm},
                {"batch_size", l.batch_size},
                {"history", l.history},
                {"enable_f1", l.enable_f1},
                {"enable_f2", l.enable_f2},
                {"distance_reward", l.distance_reward},
                {"delta", l.delta},
                {"delta_f", l.delta_f},
                {"eta", l.eta},
                {"supervised_init", l.supervised_init},
                {"supervised_init_epochs", l.supervised_init_epochs},
                {"reinit_direction_head", l.reinit_direction_head},
                {"demo_fraction", l.demo_fraction},
                {"pg_batch", l.pg_batch},
                {"replay_capacity", l.replay_capacity},
                {"epsilon_start", l.epsilon_start},
                {"epsilon_end", l.epsilon_end},
                {"epsilon_decay_steps", l.epsilon_decay_steps},
                {"gamma", l.gamma},
                {"priority_exponent", l.priority_exponent},
                {"dqn_update_every", l.dqn_update_every},
                {"lr_dqn", l.lr_dqn},
                {"select_best", l.select_best},
                {"record_time", l.record_time}};
  ojson conv = ojson::array();
  for (const auto& s : l.dims.conv)
    conv.push_back({{"filters", s.filters}, {"kernel", s.kernel}, {"stride", s.stride},
                    {"pad", s.pad}});
  j["model"] = {{"embed_dim", l.dims.embed_dim},
                {"lstm_hidden", l.dims.lstm_hidden},
                {"conv", conv},
                {"visual_dim", l.dims.visual_dim},
                {"block_embed", l.dims.block_embed},
                {"dir_embed", l.dims.dir_embed},
                {"hidden", l.dims.hidden},
                {"init", init_name(l.init)}};
  return j.dump(2);
}

Splits split_examples(std::vector<TaskExample> examples, std::uint64_t seed) {
  const auto order = detail::shuffled(examples.size(), seed, "split", 0);
  const size_t n = examples.size();
  const size_t n_train = n * 7 / 10;
  const size_t n_val = n / 10;
  Splits s;
  for (size_t k = 0; k < n; ++k) {
    auto& ex = examples[order[k]];
    if (k < n_train) s.train.push_back(std::move(ex));
    else if (k < n_train + n_val) s.validation.push_back(std::move(ex));
    else s.test.push_back(std::move(ex));
  }
  return s;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& g = cfg.geometry;
  Splits s;
  if (cfg.synthetic) {
    s = split_examples(generate_synthetic(*cfg.synthetic, g), cfg.synthetic->seed);
  } else {
    auto all = load_corpus(*cfg.corpus, g);
    if (cfg.validation_corpus || cfg.test_corpus) {
      s.train = std::move(all);
      if (cfg.validation_corpus) s.validation = load_corpus(*cfg.validation_corpus, g);
      if (cfg.test_corpus) s.test = load_corpus(*cfg.test_corpus, g);
    } else {
      s = split_examples(std::move(all), cfg.seed);
    }
  }
  PreparedData out;
  out.dataset.geometry = g;
  std::vector<std::string> texts;
  for (const auto& ex : s.train) texts.push_back(ex.instruction.raw);
  out.dataset.vocab = Vocabulary::build(texts);
  for (auto* part : {&s.train, &s.validation, &s.test}) {
    ensure_demonstrations(*part, g);
    tokenize_examples(*part, out.dataset.vocab);
  }
  out.dataset.train = std::move(s.train);
  out.dataset.monitor = std::move(s.validation);
  out.test = std::move(s.test);
  return out;
}

}  // namespace blocks
