#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "blocks/experiment.hpp"
#include "blocks/learn.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace blocks;
namespace fs = std::filesystem;

namespace {

const char* kTinyModel =
    R"("model":{"embed_dim":6,"lstm_hidden":5,"conv":[{"filters":2,"kernel":3,"stride":1,"pad":1}],)"
    R"("visual_dim":7,"block_embed":3,"dir_embed":3,"hidden":9})";

std::string tiny_config_json(int epochs, const std::string& out) {
  return std::string(R"({"preset":"desk","seed":3,"out":")") + out +
         R"(","data":{"synthetic":{"count":30}},"learn":{"epochs":)" + std::to_string(epochs) +
         R"(,"supervised_init_epochs":1,"horizon":6},)" + kTinyModel + "}";
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::path(WORK_DIR) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(BLOCKSRL) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST_CASE("desk preset") {
  const auto c = preset_config("desk");
  CHECK(c.geometry.width == 5);
  CHECK(c.geometry.block_ids.size() == 3);
  REQUIRE(c.synthetic);
  CHECK(c.synthetic->count == 286);
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}

TEST_CASE("full-scale preset uses a 25x25 board") {
  const auto c = preset_config("full-scale");
  CHECK(c.geometry.width == 25);
  CHECK(c.geometry.height == 25);
  CHECK(c.geometry.block_ids.size() == 20);
  CHECK(c.learn.horizon == 40);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config overrides and error messages") {
  const auto c = parse_config(
      R"({"seed":9,"algo":"reinforce","learn":{"epochs":3},"data":{"synthetic":{"count":40}}})",
      "/base");
  CHECK(c.seed == 9);
  CHECK(c.learn.seed == 9);
  CHECK(c.algo == Algo::Reinforce);
  CHECK(c.learn.epochs == 3);
  CHECK(c.synthetic->count == 40);
  CHECK(c.synthetic->max_displacement == 3);
  CHECK(c.out_dir == "/base/out");

  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"learn":{"epoch":3}})").find("learn.epoch") != std::string::npos);
  CHECK(message(R"({"learn":{"epochs":"x"}})").find("learn.epochs") != std::string::npos);
  CHECK(message(R"({"algo":"sarsa"})").find("sarsa") != std::string::npos);
  CHECK(message(R"({"data":{"corpus":"a.jsonl","synthetic":{}}})").find("exactly one") !=
        std::string::npos);
  CHECK(message("{not json").find("config") != std::string::npos);
}

TEST_CASE("corpus paths resolve against the config directory") {
  const auto c = parse_config(R"({"data":{"corpus":"d/c.jsonl","test":"/abs/t.jsonl"}})", "/x/y");
  CHECK(*c.corpus == "/x/y/d/c.jsonl");
  CHECK(*c.test_corpus == "/abs/t.jsonl");
  CHECK_FALSE(c.synthetic);
}

TEST_CASE("config serialization round trips") {
  auto c = preset_config("desk");
  c.algo = Algo::Dqn;
  c.learn.enable_f2 = false;
  c.learn.dims.conv.push_back(ConvLayerSpec{4, 3, 2, 0});
  const auto text = config_to_json(c);
  CHECK(config_to_json(parse_config(text)) == text);
}

TEST_CASE("split sizes and determinism") {
  const auto g = preset_config("desk").geometry;
  SyntheticSpec spec;
  spec.count = 286;
  const auto all = generate_synthetic(spec, g);
  const auto s = split_examples(all, 1);
  CHECK(s.train.size() == 200);
  CHECK(s.validation.size() == 28);
  CHECK(s.test.size() == 58);
  const auto t = split_examples(all, 1);
  for (size_t i = 0; i < s.test.size(); ++i) CHECK(s.test[i].id == t.test[i].id);
  const auto u = split_examples(all, 2);
  bool differs = false;
  for (size_t i = 0; i < s.test.size(); ++i) differs |= s.test[i].id != u.test[i].id;
  CHECK(differs);
}

TEST_CASE("prepared data tokenizes every split") {
  auto c = parse_config(tiny_config_json(1, "out"));
  const auto d = prepare_data(c);
  CHECK(d.dataset.train.size() == 21);
  CHECK(d.dataset.monitor.size() == 3);
  CHECK(d.test.size() == 6);
  for (const auto& ex : d.test) {
    CHECK(ex.demonstration);
    CHECK_FALSE(ex.instruction.tokens.empty());
  }
}

TEST_CASE("cli: usage errors exit 1") {
  CHECK(run("train --algo sarsa").code == 1);
  CHECK(run("").code == 1);
  const auto dir = fresh_dir("usage");
  write_text(dir / "c.json", R"({"data":{"synthetic":{"count":0}}})");
  CHECK(run("gen-data --config " + (dir / "c.json").string()).code == 1);
}

TEST_CASE("cli: gen-data is byte-identical across runs") {
  const auto dir = fresh_dir("gen");
  write_text(dir / "c.json", R"({"data":{"synthetic":{"count":25}}})");
  REQUIRE(run("gen-data --config " + (dir / "c.json").string() + " --out " + (dir / "a").string())
              .code == 0);
  REQUIRE(run("gen-data --config " + (dir / "c.json").string() + " --out " + (dir / "b").string())
              .code == 0);
  const auto a = read_text(dir / "a" / "corpus.jsonl");
  CHECK_FALSE(a.empty());
  CHECK(a == read_text(dir / "b" / "corpus.jsonl"));
  CHECK(std::count(a.begin(), a.end(), '\n') == 25);
}

TEST_CASE("cli: training is deterministic and resumable") {
  const auto dir = fresh_dir("train");
  write_text(dir / "two.json", tiny_config_json(2, "two"));
  write_text(dir / "two_again.json", tiny_config_json(2, "two_again"));
  write_text(dir / "one.json", tiny_config_json(1, "one"));
  write_text(dir / "resumed.json", tiny_config_json(2, "resumed"));
  REQUIRE(run("train --config " + (dir / "two.json").string()).code == 0);
  REQUIRE(run("train --config " + (dir / "two_again.json").string()).code == 0);
  const auto metrics = read_text(dir / "two" / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);
  CHECK(metrics == read_text(dir / "two_again" / "metrics.csv"));
  const auto model = load_checkpoint((dir / "two" / "model.ckpt").string());
  const auto again = load_checkpoint((dir / "two_again" / "model.ckpt").string());
  CHECK(model.params.tensors == again.params.tensors);

  REQUIRE(run("train --config " + (dir / "one.json").string()).code == 0);
  REQUIRE(run("train --config " + (dir / "resumed.json").string() + " --resume " +
              (dir / "one" / "state.bin").string())
              .code == 0);
  CHECK(read_text(dir / "resumed" / "metrics.csv") == metrics);
  CHECK(load_checkpoint((dir / "resumed" / "model.ckpt").string()).params.tensors ==
        model.params.tensors);

  SUBCASE("evaluating a checkpoint and an ensemble of copies") {
    const auto ck = (dir / "two" / "model.ckpt").string();
    const auto cfg = (dir / "two.json").string();
    const auto single = run("eval --config " + cfg + " --checkpoint " + ck + " --out " +
                            (dir / "e1").string());
    const auto three = run("eval --config " + cfg + " --ensemble " + ck + "," + ck + "," + ck +
                           " --out " + (dir / "e3").string());
    REQUIRE(single.code == 0);
    REQUIRE(three.code == 0);
    const auto a = nlohmann::json::parse(read_text(dir / "e1" / "report.json"));
    const auto b = nlohmann::json::parse(read_text(dir / "e3" / "report.json"));
    for (size_t i = 0; i < a["episodes"].size(); ++i)
      CHECK(a["episodes"][i]["final_error"] == b["episodes"][i]["final_error"]);
  }
}

TEST_CASE("cli: baselines evaluate without a checkpoint") {
  const auto dir = fresh_dir("baseline");
  write_text(dir / "c.json", tiny_config_json(1, "out"));
  const auto r = run("eval --config " + (dir / "c.json").string() + " --algo stop");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean_error") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "eval_config.json"));
  CHECK(run("eval --config " + (dir / "c.json").string() + " --algo cbpg").code == 1);
}

TEST_CASE("cli: shaping check") {
  const auto ok = run("shaping-check --trials 5 --seed 2");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("5/5 preserved") != std::string::npos);
  const auto fx =
      run("shaping-check --trials 0 --fixture " FIXTURE_DIR "/non_potential_mdp.json");
  CHECK(fx.code == 0);
  CHECK(fx.out.find("VIOLATED") != std::string::npos);
}

TEST_CASE("cli: rollout of a policy that stops at once") {
  const auto dir = fresh_dir("rollout");
  write_text(dir / "c.json", tiny_config_json(1, "out"));
  const auto cfg = load_config((dir / "c.json").string());
  const auto data = prepare_data(cfg);
  Checkpoint ck;
  ck.header_json = config_to_json(cfg);
  ck.params = make_policy(data.dataset, cfg.learn, HeadKind::Factored);
  ck.params.tensors["dir_w"].data.assign(ck.params.tensors["dir_w"].size(), 0.0);
  ck.params.tensors["dir_b"].data.assign(ck.params.tensors["dir_b"].size(), 0.0);
  ck.params.tensors["dir_b"].data[kDirStop] = 50.0;
  ck.vocab = data.dataset.vocab;
  save_checkpoint((dir / "stop.ckpt").string(), ck);

  const auto id = data.test.front().id;
  const auto r = run("rollout --config " + (dir / "c.json").string() + " --checkpoint " +
                     (dir / "stop.ckpt").string() + " --example " + id + " --split test");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  int steps = 0;
  while (std::getline(lines, line))
    if (!line.empty() && line[0] != '#') {
      ++steps;
      CHECK(line.find("STOP") != std::string::npos);
    }
  CHECK(steps == 1);

  const auto demo = run("rollout --config " + (dir / "c.json").string() + " --example " + id +
                        " --split test");
  REQUIRE(demo.code == 0);
  CHECK(demo.out.find("# sum of shaped rewards") != std::string::npos);
  CHECK(run("rollout --config " + (dir / "c.json").string() + " --example missing").code == 1);
}
