#include <random>

#include "blocks/lang.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace blocks;
using testutil::state_of;

namespace {

BoardGeometry two_block_board() {
  BoardGeometry g;
  g.width = 10;
  g.height = 10;
  g.block_ids = {"toyota", "sri"};
  return g;
}

}  // namespace

TEST_CASE("vocabulary reserves distinct pad and unk ids") {
  const auto v = Vocabulary::build({"Move Toyota east", "move SRI west!"});
  CHECK(Vocabulary::kPad != Vocabulary::kUnk);
  CHECK(v.size() == 2 + 5);
  CHECK(v.known_tokens() == std::vector<std::string>{"east", "move", "sri", "toyota", "west"});
  for (int i = 0; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
  CHECK(v.id("honda") == Vocabulary::kUnk);
  CHECK(Vocabulary::from_tokens(v.known_tokens()) == v);
}

TEST_CASE("tokenize lowercases, splits punctuation and maps unknown words to unk") {
  const auto v = Vocabulary::build({"move toyota east"});
  const auto ins = tokenize("Move Toyota east", v);
  REQUIRE(ins.tokens.size() == 3);
  for (int t : ins.tokens) CHECK(t >= 2);
  CHECK(ins.raw == "Move Toyota east");

  const auto unk = tokenize("move honda, east.", v);
  REQUIRE(unk.tokens.size() == 3);
  CHECK(unk.tokens[1] == Vocabulary::kUnk);
  CHECK(unk.tokens[0] == ins.tokens[0]);

  const auto once = normalize_words("Move, TOYOTA--east!");
  std::string joined;
  for (const auto& w : once) joined += w + " ";
  CHECK(normalize_words(joined) == once);
}

TEST_CASE("demonstration for a clear two-cell move") {
  const auto g = two_block_board();
  const auto start = state_of({{5, 5}, {0, 0}});
  const auto goal = state_of({{3, 5}, {0, 0}});
  const auto e = make_demonstration(start, goal, g);
  REQUIRE(e.length() == 3);
  CHECK(e.steps[0].second == Action::move(0, Direction::West));
  CHECK(e.steps[1].second == Action::move(0, Direction::West));
  CHECK(e.steps[2].second.is_stop());
  CHECK(*e.steps[2].first.cells[0] == Cell{3, 5});
}

TEST_CASE("demonstration detours around a single obstacle") {
  const auto g = two_block_board();
  const auto start = state_of({{2, 5}, {3, 5}});
  const auto goal = state_of({{4, 5}, {3, 5}});
  const auto e = make_demonstration(start, goal, g);
  CHECK(e.length() - 1 == 2 + 2);
  CHECK(e.length() - 1 == testutil::relaxation_path_length(start, goal, g));
  // N before S on ties
  CHECK(e.steps[0].second == Action::move(0, Direction::North));
}

TEST_CASE("demonstration errors") {
  BoardGeometry g;
  g.width = 3;
  g.height = 1;
  g.block_ids = {"a", "b"};
  CHECK_THROWS_AS(make_demonstration(state_of({{0, 0}, {1, 0}}), state_of({{2, 0}, {1, 0}}), g),
                  NoPath);
  CHECK_THROWS_AS(make_demonstration(state_of({{0, 0}, {1, 0}}), state_of({{0, 0}, {1, 0}}), g),
                  ValidationError);
  CHECK_THROWS_AS(make_demonstration(state_of({{0, 0}, {1, 0}}), state_of({{1, 0}, {2, 0}}), g),
                  ValidationError);
}

TEST_CASE("demonstration length matches the relaxation oracle on random boards") {
  std::mt19937_64 rng(3);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int checked = 0;
  while (checked < 100) {
    BoardGeometry g;
    g.width = uniform(2, 8);
    g.height = uniform(2, 8);
    const int n = std::min(uniform(1, 5), g.width * g.height - 1);
    for (int b = 0; b < n; ++b) g.block_ids.push_back("b" + std::to_string(b));
    WorldState start(n);
    for (int b = 0; b < n; ++b) {
      Cell c;
      do c = {uniform(0, g.width - 1), uniform(0, g.height - 1)};
      while (start.occupant(c) >= 0);
      start.cells[b] = c;
    }
    WorldState goal = start;
    Cell c;
    do c = {uniform(0, g.width - 1), uniform(0, g.height - 1)};
    while (start.occupant(c) >= 0);
    goal.cells[uniform(0, n - 1)] = c;
    const int oracle = testutil::relaxation_path_length(start, goal, g);
    if (oracle < 0) {
      CHECK_THROWS_AS(make_demonstration(start, goal, g), NoPath);
      continue;
    }
    const auto e = make_demonstration(start, goal, g);
    CHECK(e.length() - 1 == oracle);
    ++checked;
  }
}

TEST_CASE("corpus parsing and validation") {
  const auto g = two_block_board();
  const std::string good =
      R"({"id":"a","instruction":"move toyota west","start":[["toyota",5,5],["sri",0,0]],"goal":[["toyota",4,5],["sri",0,0]]})"
      "\n";
  const auto one = parse_corpus(good, g);
  REQUIRE(one.size() == 1);
  CHECK(one[0].moved_block() == 0);
  CHECK_FALSE(one[0].demonstration);

  const std::string same =
      R"({"id":"b","instruction":"x","start":[["toyota",5,5]],"goal":[["toyota",5,5]]})";
  CHECK_THROWS_AS(parse_corpus(same, g), ValidationError);
  const std::string two =
      R"({"id":"c","instruction":"x","start":[["toyota",5,5],["sri",0,0]],"goal":[["toyota",4,5],["sri",0,1]]})";
  CHECK_THROWS_WITH_AS(parse_corpus(two, g), doctest::Contains("exactly one block"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse_corpus(good + "{not json\n", g), doctest::Contains("line 2"),
                       ParseError);
  CHECK_THROWS_AS(parse_corpus(R"({"id":"a","instruction":"x","start":[]})", g), ParseError);
  const std::string bad_demo =
      R"({"id":"d","instruction":"x","start":[["toyota",5,5]],"goal":[["toyota",4,5]],"demonstration":[["toyota","E"],["toyota","STOP"]]})";
  CHECK_THROWS_AS(parse_corpus(bad_demo, g), ValidationError);
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl", g), ParseError);
}

TEST_CASE("synthetic generation is seed-deterministic") {
  const auto g = testutil::desk_geometry();
  SyntheticSpec spec;
  spec.seed = 1;
  spec.count = 5;
  const auto a = generate_synthetic(spec, g);
  const auto b = generate_synthetic(spec, g);
  CHECK(format_corpus(a, g) == format_corpus(b, g));
  spec.count = 0;
  CHECK_THROWS_AS(generate_synthetic(spec, g), ValidationError);
}

TEST_CASE("displacement goals are start plus k steps") {
  const auto g = testutil::desk_geometry();
  SyntheticSpec spec;
  spec.count = 300;
  spec.templates = TemplateSet::Basic;
  int seen = 0;
  for (const auto& ex : generate_synthetic(spec, g)) {
    const auto& raw = ex.instruction.raw;
    if (raw.find("two steps east") == std::string::npos) continue;
    const int b = ex.moved_block();
    CHECK(ex.goal.cells[b]->col == ex.start.cells[b]->col + 2);
    CHECK(ex.goal.cells[b]->row == ex.start.cells[b]->row);
    ++seen;
  }
  CHECK(seen > 0);
}

TEST_CASE("generated corpora round-trip through save and load") {
  const auto g = testutil::desk_geometry();
  SyntheticSpec spec;
  spec.seed = 4;
  spec.count = 1000;
  const auto examples = generate_synthetic(spec, g);
  const auto text = format_corpus(examples, g);
  const auto back = parse_corpus(text, g);
  REQUIRE(back.size() == examples.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].start == examples[i].start);
    CHECK(back[i].goal == examples[i].goal);
    CHECK(back[i].demonstration->steps == examples[i].demonstration->steps);
    CHECK(states_equal_relaxed(back[i].demonstration->steps.back().first, back[i].goal));
  }
  CHECK(format_corpus(back, g) == text);

  const auto lexicon = synthetic_lexicon(g);
  const auto vocab = Vocabulary::from_tokens(lexicon);
  for (const auto& ex : examples)
    for (int t : tokenize(ex.instruction.raw, vocab).tokens) CHECK(t != Vocabulary::kUnk);
}

TEST_CASE("crowded boards exhaust the resampling budget") {
  BoardGeometry g;
  g.width = 2;
  g.height = 1;
  g.block_ids = {"a", "b"};
  SyntheticSpec spec;
  spec.count = 1;
  spec.resample_budget = 50;
  CHECK_THROWS_AS(generate_synthetic(spec, g), ValidationError);
}
